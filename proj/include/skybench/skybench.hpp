#pragma once

#include "skybench/curriculum.hpp"
#include "skybench/error.hpp"
#include "skybench/eval.hpp"
#include "skybench/geometry.hpp"
#include "skybench/image.hpp"
#include "skybench/manifest.hpp"
#include "skybench/rng.hpp"
#include "skybench/scene.hpp"
#include "skybench/scenegen.hpp"
#include "skybench/skynet/layers.hpp"
#include "skybench/skynet/loss.hpp"
#include "skybench/skynet/model.hpp"
#include "skybench/skynet/weights.hpp"
#include "skybench/tile_fetch.hpp"
#include "skybench/tilemath.hpp"
