#include "kshrl/names.hpp"

#include <array>
#include <utility>

#include "kshrl/error.hpp"

namespace kshrl {

namespace {

template <typename E, std::size_t N>
using Table = std::array<std::pair<E, std::string_view>, N>;

constexpr Table<BasisFamily, 2> basis_names{{{BasisFamily::bspline, "bspline"},
                                             {BasisFamily::trigonometric, "trigonometric"}}};
constexpr Table<KernelFamily, 3> kernel_names{{{KernelFamily::gaussian, "gaussian"},
                                               {KernelFamily::epanechnikov, "epanechnikov"},
                                               {KernelFamily::boxcar, "boxcar"}}};
constexpr Table<ActionMode, 2> mode_names{{{ActionMode::discrete, "discrete"},
                                           {ActionMode::continuous, "continuous"}}};
constexpr Table<CandidateChoice::Kind, 3> candidate_names{{{CandidateChoice::Kind::feature, "feature"},
                                                           {CandidateChoice::Kind::action, "action"},
                                                           {CandidateChoice::Kind::column, "column"}}};
constexpr Table<ThresholdConvention, 2> threshold_names{{{ThresholdConvention::standard, "standard"},
                                                         {ThresholdConvention::inverse_step, "inverse_step"}}};
constexpr Table<FitMethod, 2> method_names{{{FitMethod::analytic, "analytic"},
                                            {FitMethod::coordinate_descent, "coordinate_descent"}}};
constexpr Table<StepRule, 3> step_names{{{StepRule::fixed, "fixed"},
                                         {StepRule::global_auto, "global_auto"},
                                         {StepRule::per_group, "per_group"}}};
constexpr Table<LossKind, 2> loss_names{{{LossKind::bellman, "bellman"}, {LossKind::mse, "mse"}}};

template <typename E, std::size_t N>
std::string name_of(const Table<E, N>& table, E v) {
    for (const auto& [e, name] : table) {
        if (e == v) return std::string(name);
    }
    return "unknown";
}

template <typename E, std::size_t N>
E lookup(const Table<E, N>& table, std::string_view s, const char* what) {
    for (const auto& [e, name] : table) {
        if (name == s) return e;
    }
    std::string allowed;
    for (const auto& [e, name] : table) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
    throw InputError("unknown " + std::string(what) + " '" + std::string(s) + "' (expected one of: " + allowed + ")");
}

}  // namespace

std::string to_string(BasisFamily v) { return name_of(basis_names, v); }
std::string to_string(KernelFamily v) { return name_of(kernel_names, v); }
std::string to_string(ActionMode v) { return name_of(mode_names, v); }
std::string to_string(CandidateChoice::Kind v) { return name_of(candidate_names, v); }
std::string to_string(ThresholdConvention v) { return name_of(threshold_names, v); }
std::string to_string(FitMethod v) { return name_of(method_names, v); }
std::string to_string(StepRule v) { return name_of(step_names, v); }
std::string to_string(LossKind v) { return name_of(loss_names, v); }

BasisFamily parse_basis_family(std::string_view s) { return lookup(basis_names, s, "basis family"); }
KernelFamily parse_kernel_family(std::string_view s) { return lookup(kernel_names, s, "kernel family"); }
ActionMode parse_action_mode(std::string_view s) { return lookup(mode_names, s, "action mode"); }
CandidateChoice::Kind parse_candidate_kind(std::string_view s) { return lookup(candidate_names, s, "candidate kind"); }
ThresholdConvention parse_threshold(std::string_view s) { return lookup(threshold_names, s, "threshold convention"); }
FitMethod parse_fit_method(std::string_view s) { return lookup(method_names, s, "fit method"); }
StepRule parse_step_rule(std::string_view s) { return lookup(step_names, s, "step rule"); }
LossKind parse_loss(std::string_view s) { return lookup(loss_names, s, "loss"); }

}  // namespace kshrl
