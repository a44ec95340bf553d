#pragma once

// Fast invariant checks exposed through the `selftest` subcommand.

#include <iosfwd>
#include <string>
#include <vector>

namespace mmpr {

struct SelftestOptions {
    /// Multiplies every bound before the domination check. Values below 1
    /// are a deliberate mutation that the suite must detect.
    double bound_scale = 1.0;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

std::vector<CheckResult> run_selftest(const SelftestOptions& opts = {});

/// One "PASS|FAIL name: detail" line per check; true when all passed.
bool report(const std::vector<CheckResult>& results, std::ostream& out);

}  // namespace mmpr
