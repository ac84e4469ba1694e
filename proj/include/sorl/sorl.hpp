#pragma once

#include "sorl/agent.hpp"
#include "sorl/baselines.hpp"
#include "sorl/critics.hpp"
#include "sorl/envs.hpp"
#include "sorl/harness/config.hpp"
#include "sorl/harness/experiment.hpp"
#include "sorl/harness/summary.hpp"
#include "sorl/mdp.hpp"
#include "sorl/nn.hpp"
#include "sorl/oracle.hpp"
#include "sorl/records.hpp"
#include "sorl/replay.hpp"
#include "sorl/shaping.hpp"
#include "sorl/tabular.hpp"
#include "sorl/tuning.hpp"
