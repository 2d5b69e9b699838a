#pragma once

#include "mdpopt/mdp.hpp"

#include <string>

namespace mdpopt {

/// MDP document (JSON text): num_states, num_actions, gamma, transitions
/// [a][s][t], rewards [a][s] and optional e [s]. Unknown keys are rejected.
/// Throws Error(ParseError) on malformed input; stochasticity is left to
/// validate_mdp.
TabularMdp parse_mdp(const std::string& text);
TabularMdp read_mdp_file(const std::string& path);

/// Numbers are written with 17 significant digits, so reading the text back
/// reproduces every binary64 value exactly.
std::string format_mdp(const TabularMdp& mdp);
void write_mdp_file(const TabularMdp& mdp, const std::string& path);

} // namespace mdpopt
