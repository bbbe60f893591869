#pragma once

// Umbrella header.

#include "bench.hpp"
#include "circulant.hpp"
#include "detect.hpp"
#include "error.hpp"
#include "features.hpp"
#include "fft.hpp"
#include "image.hpp"
#include "io.hpp"
#include "solvers.hpp"
#include "stats.hpp"
#include "synthetic.hpp"
#include "toeplitz.hpp"
#include "trainer.hpp"
