#pragma once

#include "ens/aggregate.hpp"
#include "ens/baseline.hpp"
#include "ens/cube_io.hpp"
#include "ens/cube_model.hpp"
#include "ens/curation.hpp"
#include "ens/error.hpp"
#include "ens/indicators.hpp"
#include "ens/ndvi_masking.hpp"
#include "ens/npz.hpp"
#include "ens/numeric.hpp"
#include "ens/parallel.hpp"
#include "ens/random.hpp"
#include "ens/report.hpp"
#include "ens/scoring.hpp"
#include "ens/synth.hpp"
#include "ens/tensor.hpp"
