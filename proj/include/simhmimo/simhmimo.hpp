#pragma once

#include "simhmimo/types.hpp"
#include "simhmimo/geometry.hpp"
#include "simhmimo/propagation.hpp"
#include "simhmimo/channel.hpp"
#include "simhmimo/target.hpp"
#include "simhmimo/optimizer.hpp"
#include "simhmimo/metrics.hpp"
#include "simhmimo/config.hpp"
#include "simhmimo/experiment.hpp"
