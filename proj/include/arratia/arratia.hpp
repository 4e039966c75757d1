#pragma once

#include "arratia/errors.hpp"
#include "arratia/mass_profile.hpp"
#include "arratia/rng.hpp"
#include "arratia/flow_sim.hpp"
#include "arratia/replicates.hpp"
#include "arratia/estimators.hpp"
#include "arratia/verify.hpp"
