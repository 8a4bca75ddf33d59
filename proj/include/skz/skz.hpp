#pragma once

#include "skz/analysis.hpp"
#include "skz/bregman.hpp"
#include "skz/problem.hpp"
#include "skz/problems.hpp"
#include "skz/row_matrix.hpp"
#include "skz/solver.hpp"
#include "skz/spectral.hpp"
