#pragma once

#include <string>
#include <utility>
#include <vector>

namespace snp {

// One swept parameter: a config path plus its value list. Parsed from
// "section.key=v1,v2,..." or "section.key=start:stop:step" (inclusive
// numeric range).
struct SweepAxis {
    std::string path;
    std::vector<std::string> values;

    static SweepAxis parse(const std::string& arg);
};

struct SweepCell {
    std::vector<std::pair<std::string, std::string>> assignments;  // (path, value)

    // Directory-safe key: "guidance.lambda_t=0.2,wcm.enabled=true";
    // "base" for the empty cell.
    std::string key() const;
};

// Cartesian product across axes, first axis slowest. An empty spec yields
// one empty cell.
std::vector<SweepCell> expand_sweep(const std::vector<SweepAxis>& axes);

}  // namespace snp
