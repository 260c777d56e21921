#pragma once

#include "clg/benchmarks.hpp"
#include "clg/dbn.hpp"
#include "clg/discrete.hpp"
#include "clg/errors.hpp"
#include "clg/experiments.hpp"
#include "clg/gaussian.hpp"
#include "clg/inference.hpp"
#include "clg/io.hpp"
#include "clg/model.hpp"
#include "clg/two_slice.hpp"
