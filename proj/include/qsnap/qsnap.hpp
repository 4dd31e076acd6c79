#pragma once

#include "qsnap/circuit.hpp"
#include "qsnap/config.hpp"
#include "qsnap/decoders.hpp"
#include "qsnap/errors.hpp"
#include "qsnap/estimators.hpp"
#include "qsnap/harness/catalog.hpp"
#include "qsnap/harness/cohort.hpp"
#include "qsnap/harness/studies.hpp"
#include "qsnap/harness/table.hpp"
#include "qsnap/network.hpp"
#include "qsnap/noise.hpp"
#include "qsnap/oracle.hpp"
#include "qsnap/rng.hpp"
#include "qsnap/snapshot.hpp"
#include "qsnap/state.hpp"
#include "qsnap/synthesis.hpp"
