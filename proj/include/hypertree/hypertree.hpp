#pragma once

#include "hypertree/calibration.hpp"
#include "hypertree/distortion.hpp"
#include "hypertree/euclidean.hpp"
#include "hypertree/experiment.hpp"
#include "hypertree/format.hpp"
#include "hypertree/galton_watson.hpp"
#include "hypertree/ising.hpp"
#include "hypertree/lateral.hpp"
#include "hypertree/lazy_embedding.hpp"
#include "hypertree/margin.hpp"
#include "hypertree/parallel.hpp"
#include "hypertree/poincare.hpp"
#include "hypertree/protocol.hpp"
#include "hypertree/rng.hpp"
#include "hypertree/sarkar.hpp"
#include "hypertree/spec.hpp"
#include "hypertree/spherical_code.hpp"
#include "hypertree/stats.hpp"
#include "hypertree/tree.hpp"
#include "hypertree/tree_io.hpp"
#include "hypertree/wavelet.hpp"
