#pragma once

#include "mqam/version.hpp"
#include "mqam/random.hpp"
#include "mqam/channel.hpp"
#include "mqam/mdp.hpp"
#include "mqam/solvers.hpp"
#include "mqam/structure.hpp"
#include "mqam/dspsa.hpp"
#include "mqam/experiment.hpp"
#include "mqam/io.hpp"
