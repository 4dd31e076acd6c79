#pragma once

// Minimal CSV tables. Cells never contain commas, quotes or newlines
// (sanitize_cell enforces it), so no quoting is needed.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qsnap/circuit.hpp"
#include "qsnap/config.hpp"
#include "qsnap/errors.hpp"

namespace qsnap {

inline constexpr const char* kNA = "NA";

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw std::invalid_argument("CSV has no column '" + name + "'");
  }

  bool operator==(const CsvTable&) const = default;
};

inline std::string sanitize_cell(std::string s) {
  for (auto& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  }
  return s;
}

inline std::string cell(double v) { return format_double(v); }
inline std::string cell(std::size_t v) { return std::to_string(v); }

template <class T>
std::string cell(const std::optional<T>& v) {
  return v ? cell(*v) : std::string(kNA);
}

inline std::optional<std::size_t> parse_optional_count(const std::string& s) {
  if (s == kNA) return std::nullopt;
  return static_cast<std::size_t>(parse_unsigned("cell", s));
}

inline std::optional<double> parse_optional_double(const std::string& s) {
  if (s == kNA) return std::nullopt;
  return parse_double("cell", s);
}

inline std::string to_csv(const CsvTable& t) {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << sanitize_cell(cells[i]);
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw std::invalid_argument("CSV row width differs from header");
    line(r);
  }
  return os.str();
}

inline CsvTable parse_csv(std::string_view text) {
  CsvTable t;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t s = 0;
    while (true) {
      const std::size_t c = line.find(',', s);
      cells.emplace_back(line.substr(s, c == std::string_view::npos ? std::string_view::npos : c - s));
      if (c == std::string_view::npos) break;
      s = c + 1;
    }
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size()) throw std::invalid_argument("CSV row width differs from header");
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw storage_error("cannot write " + path.string());
  out << text;
  if (!out) throw storage_error("write failed: " + path.string());
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) { write_text(path, to_csv(t)); }

inline CsvTable load_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path.string())); }

}  // namespace qsnap
