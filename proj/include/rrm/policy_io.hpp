#pragma once

#include <string>

#include "rrm/policy.hpp"

namespace rrm {

/// Policy JSON document: version, action_labels, normalizer, ensemble
/// (row-major layer matrices, input to output) and schedule.
std::string serialize_policy(const Policy& policy);

/// Throws Error(parse) naming the offending field on any schema violation.
Policy parse_policy(const std::string& text);

Policy load_policy_file(const std::string& path);
void save_policy_file(const Policy& policy, const std::string& path);

}  // namespace rrm
