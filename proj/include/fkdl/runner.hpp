#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fkdl/config.hpp"

namespace fkdl {

extern const char* const kCodeVersion;

struct RunOptions {
    std::string out_dir = ".";
    std::string resume;                 // checkpoint to continue from
    std::optional<std::uint64_t> seed;  // overrides chain.seed
    std::string data_dir;               // shipped kernels live in data_dir/kernels
};

// Output of one unit of work: JSONL payloads and CSV rows.
struct TaskOutput {
    std::vector<nlohmann::json> records;
    std::vector<std::string> csv_rows;
    bool ok = true;
};

struct RunSummary {
    std::string digest;
    int tasks = 0;
    int resumed = 0;
    bool ok = true;
    double seconds = 0;
    std::string jsonl_path, csv_path, checkpoint_path;
};

// Runs every task of the experiment in order. Each finished task is appended
// to <out>/<kind>.jsonl and recorded in the checkpoint, so an interrupted run
// continues with --resume and produces the same bytes. Wall-clock time goes
// to <out>/<kind>.run.json, never into the JSONL.
RunSummary run_experiment(const RunConfig& cfg, const RunOptions& opt, std::ostream& log);

// CSV header for an experiment (header-only file for empty results).
std::string csv_header(const std::string& kind);

}  // namespace fkdl
