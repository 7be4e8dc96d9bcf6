#pragma once

#include "uqdvr/classify.hpp"
#include "uqdvr/density.hpp"
#include "uqdvr/geometry.hpp"
#include "uqdvr/image.hpp"
#include "uqdvr/interp.hpp"
#include "uqdvr/io.hpp"
#include "uqdvr/parallel.hpp"
#include "uqdvr/random.hpp"
#include "uqdvr/render.hpp"
#include "uqdvr/stats.hpp"
#include "uqdvr/synth.hpp"
#include "uqdvr/transfer.hpp"
#include "uqdvr/volcore.hpp"
#include "uqdvr/experiment.hpp"
