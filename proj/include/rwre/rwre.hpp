#pragma once

#include "rwre/environment.hpp"
#include "rwre/error.hpp"
#include "rwre/level2.hpp"
#include "rwre/linalg.hpp"
#include "rwre/mc.hpp"
#include "rwre/pair_measure.hpp"
#include "rwre/parallel.hpp"
#include "rwre/passage.hpp"
#include "rwre/rate.hpp"
#include "rwre/rng.hpp"
#include "rwre/tilt.hpp"
