#pragma once

#include "qhdpart/bench.hpp"
#include "qhdpart/generators.hpp"
#include "qhdpart/graph.hpp"
#include "qhdpart/multilevel.hpp"
#include "qhdpart/oracles.hpp"
#include "qhdpart/parallel.hpp"
#include "qhdpart/qhd.hpp"
#include "qhdpart/qubo.hpp"
#include "qhdpart/qubo_io.hpp"
#include "qhdpart/random.hpp"
