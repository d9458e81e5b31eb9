#pragma once

#include "pbrl/autodiff/adam.hpp"
#include "pbrl/autodiff/tape.hpp"
#include "pbrl/autodiff/tensor.hpp"
#include "pbrl/certificate/bound.hpp"
#include "pbrl/certificate/bounded_differences.hpp"
#include "pbrl/certificate/chain_experiment.hpp"
#include "pbrl/certificate/concentration.hpp"
#include "pbrl/cli/commands.hpp"
#include "pbrl/core/csv.hpp"
#include "pbrl/core/error.hpp"
#include "pbrl/core/random.hpp"
#include "pbrl/mdp/counterexample.hpp"
#include "pbrl/mdp/dataset_io.hpp"
#include "pbrl/mdp/environment.hpp"
#include "pbrl/mdp/point_mass.hpp"
#include "pbrl/mdp/returns.hpp"
#include "pbrl/mdp/rollout.hpp"
#include "pbrl/mdp/tabular_mdp.hpp"
#include "pbrl/mdp/trajectory.hpp"
#include "pbrl/mixing/autocorrelation.hpp"
#include "pbrl/mixing/markov_chain.hpp"
#include "pbrl/mixing/mixing_time.hpp"
#include "pbrl/pbsac/config.hpp"
#include "pbrl/pbsac/pbsac.hpp"
#include "pbrl/posterior/diag_gaussian.hpp"
#include "pbrl/posterior/flatten.hpp"
#include "pbrl/sac/checkpoint.hpp"
#include "pbrl/sac/critic.hpp"
#include "pbrl/sac/mlp.hpp"
#include "pbrl/sac/policy.hpp"
#include "pbrl/sac/replay_buffer.hpp"
#include "pbrl/sac/sac.hpp"
