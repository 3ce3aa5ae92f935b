#pragma once

#include "mxw/dec_manifold.hpp"
#include "mxw/maxwell_models.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mxw {

enum ExitCode { ExitPass = 0, ExitFail = 1, ExitInvalid = 2, ExitInternal = 3 };

struct JobSpec {
    std::string command;  // spaces | cohomology | duality | compactify | hpl-demo
    std::string space = "circle";
    std::map<std::string, std::string> params;
    std::string mesh;  // path of a mesh JSON file, overrides space
    std::string model = "mxw";
    int p = 0;
    int x = -1;  // base dimension for compactify; -1 means 4 - dim Y
    std::string kappa = "1", e = "1", m = "1", lambda = "1";
    std::vector<std::string> kappas, es, lengths;  // duality grid
    bool pert = false;
    bool corrupt = false;
    std::string format = "json";
    std::string cache_dir;
    int jobs = 0;  // worker threads, 0 means hardware concurrency
};

struct JobResult {
    int exit_code = ExitPass;
    std::string output;
};

// Parses argv into a JobSpec; throws InvalidParameter on bad input. Returns nullopt after printing help.
std::optional<JobSpec> parse_job(int argc, const char* const* argv, std::string* help = nullptr);

DecManifold job_space(const JobSpec& job);
TheoryParams job_params(const JobSpec& job, const DecManifold& m);

JobResult run_spaces(const JobSpec& job);
JobResult run_cohomology(const JobSpec& job);
JobResult run_duality(const JobSpec& job);
JobResult run_compactify(const JobSpec& job);
JobResult run_hpl_demo(const JobSpec& job);
// Dispatches and maps exceptions to exit codes with a machine-readable error object.
JobResult run_job(const JobSpec& job);
int cli_main(int argc, const char* const* argv);

std::string sha256_hex(const std::string& data);

// On-disk cache of integer cohomology and comparison maps of a space, keyed by the checksum of its
// matrices; entries whose recorded checksums disagree are recomputed.
struct SpaceFactors {
    std::vector<FgAbGroup> integer_cohomology;
    std::vector<ComparisonMap> comparison;  // per degree
};

class FactorCache {
public:
    enum class Status { Disabled, Hit, Miss, Stale };

    explicit FactorCache(std::filesystem::path dir = {});
    // Cache directory from the job, else from MXW_CACHE_DIR, else disabled.
    static FactorCache for_job(const JobSpec& job);

    SpaceFactors get(const DecManifold& m);
    Status last_status() const { return last_; }
    std::filesystem::path entry_path(const DecManifold& m) const;

private:
    std::filesystem::path dir_;
    Status last_ = Status::Disabled;
};

}  // namespace mxw
