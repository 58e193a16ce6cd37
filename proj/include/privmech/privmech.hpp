#pragma once

#include "privmech/config.hpp"
#include "privmech/distributions.hpp"
#include "privmech/dutch_auction.hpp"
#include "privmech/harness.hpp"
#include "privmech/marketplace.hpp"
#include "privmech/matching.hpp"
#include "privmech/optimal_auction.hpp"
#include "privmech/oracles.hpp"
#include "privmech/rng.hpp"
#include "privmech/stats.hpp"
