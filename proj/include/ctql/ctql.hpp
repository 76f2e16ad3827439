#ifndef CTQL_CTQL_HPP
#define CTQL_CTQL_HPP

// Convenience umbrella header pulling in the full public interface.

#include "ctql/basis.hpp"
#include "ctql/commands.hpp"
#include "ctql/dynamics.hpp"
#include "ctql/learner.hpp"
#include "ctql/lqr_oracle.hpp"
#include "ctql/run_config.hpp"
#include "ctql/sampling.hpp"

#endif  // CTQL_CTQL_HPP
