#pragma once

#include "banditmd/action_set.hpp"
#include "banditmd/bregman.hpp"
#include "banditmd/dynamics.hpp"
#include "banditmd/equilibrium.hpp"
#include "banditmd/experiment.hpp"
#include "banditmd/feedback.hpp"
#include "banditmd/game.hpp"
#include "banditmd/games.hpp"
#include "banditmd/hessian.hpp"
#include "banditmd/rng.hpp"
