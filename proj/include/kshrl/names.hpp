#pragma once

#include <string>
#include <string_view>

#include "kshrl/basis.hpp"
#include "kshrl/dataset.hpp"
#include "kshrl/kernel.hpp"
#include "kshrl/modelsel.hpp"
#include "kshrl/solver.hpp"

// Text names of enumerations shared by configs, model files and CSV output.
// parse_* throw InputError on unknown names.

namespace kshrl {

std::string to_string(BasisFamily v);
std::string to_string(KernelFamily v);
std::string to_string(ActionMode v);
std::string to_string(CandidateChoice::Kind v);
std::string to_string(ThresholdConvention v);
std::string to_string(FitMethod v);
std::string to_string(StepRule v);
std::string to_string(LossKind v);

BasisFamily parse_basis_family(std::string_view s);
KernelFamily parse_kernel_family(std::string_view s);
ActionMode parse_action_mode(std::string_view s);
CandidateChoice::Kind parse_candidate_kind(std::string_view s);
ThresholdConvention parse_threshold(std::string_view s);
FitMethod parse_fit_method(std::string_view s);
StepRule parse_step_rule(std::string_view s);
LossKind parse_loss(std::string_view s);

}  // namespace kshrl
