#pragma once

// Machine-readable run reports (versioned JSON schema) shared by the CLI and
// the verification suite.

#include <json.hpp>

#include "korn/verify.hpp"

namespace korn {

using Json = nlohmann::ordered_json;

Json config_json(const PipelineConfig& cfg);
Json ledger_json(const ConstantLedger& led);
Json decomposition_json(const PiecewiseDecomposition& d, const PipelineConfig& cfg,
                        const RegularizeResult* reg = nullptr);
Json coarea_json(const CoareaPartition& cp, double rho);
Json truncation_json(const TruncationResult& tr, double q);
Json suite_json(const SuiteResult& sr, const SuiteConfig& cfg);

void write_json(const std::string& path, const Json& j);

}  // namespace korn
