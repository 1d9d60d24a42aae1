#pragma once

#include "sefa/analysis.hpp"
#include "sefa/archive.hpp"
#include "sefa/error.hpp"
#include "sefa/factorizer.hpp"
#include "sefa/image.hpp"
#include "sefa/io.hpp"
#include "sefa/linalg.hpp"
#include "sefa/manifest.hpp"
#include "sefa/matrix.hpp"
#include "sefa/npy.hpp"
#include "sefa/random.hpp"
#include "sefa/toy_generator.hpp"
