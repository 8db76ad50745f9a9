#pragma once

#include "qnac/actor.hpp"
#include "qnac/config.hpp"
#include "qnac/critic.hpp"
#include "qnac/envs.hpp"
#include "qnac/errors.hpp"
#include "qnac/linalg.hpp"
#include "qnac/lstd.hpp"
#include "qnac/mdp.hpp"
#include "qnac/oracle.hpp"
#include "qnac/plot.hpp"
#include "qnac/policies.hpp"
#include "qnac/trainer.hpp"
