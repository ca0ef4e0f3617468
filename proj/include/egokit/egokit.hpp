#pragma once

// Egocentric-demonstration toolkit: viewpoint stabilization, hand-to-robot
// action retargeting, stability metrics, and the generative-training math
// kernels, with a batch CLI on top.

#include "egokit/errors.hpp"
#include "egokit/filtering.hpp"
#include "egokit/formats.hpp"
#include "egokit/genmath.hpp"
#include "egokit/geometry.hpp"
#include "egokit/image_io.hpp"
#include "egokit/metrics.hpp"
#include "egokit/pipeline.hpp"
#include "egokit/retarget.hpp"
#include "egokit/stabilizer.hpp"
#include "egokit/vision.hpp"
