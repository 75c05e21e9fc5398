#pragma once

#include "visa/dataio.hpp"
#include "visa/infotheory.hpp"
#include "visa/irg.hpp"
#include "visa/linalg.hpp"
#include "visa/metrics.hpp"
#include "visa/mgsm.hpp"
#include "visa/nn.hpp"
#include "visa/rng.hpp"
#include "visa/scene_graph.hpp"
#include "visa/version.hpp"
