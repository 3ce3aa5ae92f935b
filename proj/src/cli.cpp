#include "mxw/cli.hpp"

#include "mxw/compactify.hpp"
#include "mxw/duality.hpp"
#include "mxw/hpl.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace mxw {

using json = nlohmann::ordered_json;

namespace {

Rat parse_rat(const std::string& s, const std::string& what)
{
    Rat q;
    if (s.empty() || q.set_str(s, 10) != 0)
        throw InvalidParameter(what + " must be an integer or a fraction a/b, got '" + s + "'");
    if (q.get_den() == 0)
        throw InvalidParameter(what + " has a zero denominator");
    q.canonicalize();
    return q;
}

std::string rs(const Rat& q) { return q.get_str(); }

json int_matrix_json(const IntMatrix& m)
{
    json a = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j).get_str());
        a.push_back(row);
    }
    return a;
}

json rat_matrix_json(const RatMatrix& m)
{
    json a = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j)
            row.push_back(rs(m(i, j)));
        a.push_back(row);
    }
    return a;
}

json real_matrix_json(const RealMatrix& m)
{
    json a = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        a.push_back(row);
    }
    return a;
}

// shapes are stored alongside since empty rows lose the column count
json shaped(const json& data, std::size_t r, std::size_t c) { return {{"rows", r}, {"cols", c}, {"data", data}}; }

IntMatrix int_matrix_from(const json& j)
{
    IntMatrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t k = 0; k < m.cols(); ++k)
            m(i, k) = Int(j.at("data").at(i).at(k).get<std::string>());
    return m;
}

RatMatrix rat_matrix_from(const json& j)
{
    RatMatrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t k = 0; k < m.cols(); ++k)
            m(i, k) = parse_rat(j.at("data").at(i).at(k).get<std::string>(), "cached entry");
    return m;
}

RealMatrix real_matrix_from(const json& j)
{
    RealMatrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t k = 0; k < m.cols(); ++k)
            m(i, k) = j.at("data").at(i).at(k).get<double>();
    return m;
}

json group_json(const FgAbGroup& g)
{
    json t = json::array();
    for (auto& d : g.torsion)
        t.push_back(d.get_str());
    return {{"free_rank", g.free_rank}, {"torsion", t}, {"group", g.str()}};
}

FgAbGroup group_from(const json& j)
{
    std::vector<Int> t;
    for (auto& d : j.at("torsion"))
        t.push_back(Int(d.get<std::string>()));
    return make_group(j.at("free_rank").get<std::size_t>(), t);
}

json space_json(const JobSpec& job, const DecManifold& m)
{
    json params = json::object();
    for (auto& [k, v] : job.params)
        params[k] = v;
    return {{"name", m.name}, {"dim", m.n}, {"cells", m.cells}, {"params", params}};
}

json params_json(const TheoryParams& t)
{
    return {{"p", t.p}, {"n", t.n}, {"kappa", rs(t.kappa)}, {"e", rs(t.e)}, {"m", rs(t.m)}, {"lambda", rs(t.lambda)}};
}

json check(const std::string& name, bool pass, const std::string& detail = "")
{
    json c = {{"name", name}, {"pass", pass}};
    if (!detail.empty())
        c["detail"] = detail;
    return c;
}

bool all_pass(const json& checks)
{
    return std::all_of(checks.begin(), checks.end(), [](const json& c) { return c.at("pass").get<bool>(); });
}

std::string md_escape(std::string s)
{
    std::string out;
    for (char c : s)
        out += c == '|' ? std::string("\\|") : std::string(1, c);
    return out;
}

std::string checks_markdown(const json& checks)
{
    std::ostringstream os;
    if (checks.empty())
        return "";
    os << "\n| check | result | detail |\n|---|---|---|\n";
    for (auto& c : checks)
        os << "| " << md_escape(c.at("name").get<std::string>()) << " | " << (c.at("pass").get<bool>() ? "PASS" : "FAIL")
           << " | " << md_escape(c.value("detail", "")) << " |\n";
    return os.str();
}

int worker_count(const JobSpec& job, std::size_t tasks)
{
    int n = job.jobs > 0 ? job.jobs : int(std::max(1u, std::thread::hardware_concurrency()));
    return std::max(1, std::min<int>(n, int(tasks)));
}

// results come back in task order regardless of scheduling
template <class F>
std::vector<json> run_pool(const JobSpec& job, std::size_t tasks, F f)
{
    std::vector<json> out(tasks);
    const int workers = worker_count(job, tasks);
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(tasks);
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w)
        threads.emplace_back([&]() {
            for (std::size_t i; (i = next++) < tasks;) {
                try {
                    out[i] = f(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : threads)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

JobResult emit(const JobSpec& job, const json& j, const std::string& markdown, int code)
{
    return {code, job.format == "markdown" ? markdown : j.dump(2) + "\n"};
}

}  // namespace

// ---- checksums and cache ----

std::string sha256_hex(const std::string& data)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr))
        throw std::runtime_error("sha256 failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i)
        os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

FactorCache::FactorCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

FactorCache FactorCache::for_job(const JobSpec& job)
{
    if (!job.cache_dir.empty())
        return FactorCache(job.cache_dir);
    if (const char* env = std::getenv("MXW_CACHE_DIR"); env && *env)
        return FactorCache(env);
    return FactorCache();
}

std::filesystem::path FactorCache::entry_path(const DecManifold& m) const
{
    return dir_ / ("factors-" + sha256_hex(to_json(m)).substr(0, 16) + ".json");
}

SpaceFactors FactorCache::get(const DecManifold& m)
{
    auto compute = [&]() {
        SpaceFactors f;
        f.integer_cohomology = integer_cohomology(m);
        const auto h = hodge_decomposition<Rat>(m);
        for (int k = 0; k <= m.n; ++k)
            f.comparison.push_back(comparison_map(m, h, k));
        return f;
    };
    if (dir_.empty()) {
        last_ = Status::Disabled;
        return compute();
    }
    const std::string input = sha256_hex(to_json(m));
    const auto path = entry_path(m);
    bool stale = false;
    if (std::filesystem::exists(path)) {
        try {
            std::ifstream in(path);
            json j = json::parse(in);
            const json& payload = j.at("payload");
            if (j.at("input_sha256") == input && j.at("payload_sha256") == sha256_hex(payload.dump())) {
                SpaceFactors f;
                for (auto& g : payload.at("integer_cohomology"))
                    f.integer_cohomology.push_back(group_from(g));
                for (auto& c : payload.at("comparison")) {
                    ComparisonMap cm;
                    cm.degree = c.at("degree").get<int>();
                    cm.generators = int_matrix_from(c.at("generators"));
                    cm.harmonic_reps = rat_matrix_from(c.at("harmonic_reps"));
                    cm.gram = rat_matrix_from(c.at("gram"));
                    cm.E = real_matrix_from(c.at("E"));
                    cm.basis = real_matrix_from(c.at("basis"));
                    f.comparison.push_back(cm);
                }
                last_ = Status::Hit;
                return f;
            }
        } catch (const std::exception&) {
        }
        stale = true;
    }
    SpaceFactors f = compute();
    json payload;
    payload["integer_cohomology"] = json::array();
    for (auto& g : f.integer_cohomology)
        payload["integer_cohomology"].push_back(group_json(g));
    payload["comparison"] = json::array();
    for (auto& c : f.comparison)
        payload["comparison"].push_back(
            {{"degree", c.degree},
             {"generators", shaped(int_matrix_json(c.generators), c.generators.rows(), c.generators.cols())},
             {"harmonic_reps", shaped(rat_matrix_json(c.harmonic_reps), c.harmonic_reps.rows(), c.harmonic_reps.cols())},
             {"gram", shaped(rat_matrix_json(c.gram), c.gram.rows(), c.gram.cols())},
             {"E", shaped(real_matrix_json(c.E), c.E.rows(), c.E.cols())},
             {"basis", shaped(real_matrix_json(c.basis), c.basis.rows(), c.basis.cols())}});
    std::filesystem::create_directories(dir_);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        out << json{{"input_sha256", input}, {"payload_sha256", sha256_hex(payload.dump())}, {"payload", payload}}.dump();
    }
    std::filesystem::rename(tmp, path);
    last_ = stale ? Status::Stale : Status::Miss;
    return f;
}

// ---- job parsing ----

std::optional<JobSpec> parse_job(int argc, const char* const* argv, std::string* help)
{
    JobSpec job;
    CLI::App app{"Generalized Maxwell theories on DEC manifolds: cohomology, duality and compactification"};
    app.require_subcommand(1);
    std::vector<std::string> params;
    auto common = [&](CLI::App* c) {
        c->add_option("--space", job.space, "built-in space (" + [] {
            std::string s;
            for (auto& n : builtin_names())
                s += (s.empty() ? "" : ", ") + n;
            return s;
        }() + ")");
        c->add_option("--param", params, "space parameter key=value (m, length, dims, lengths, genus, n)");
        c->add_option("--mesh", job.mesh, "mesh JSON file instead of a built-in space");
        c->add_option("--format", job.format, "json or markdown")->check(CLI::IsMember({"json", "markdown"}));
        c->add_option("--cache-dir", job.cache_dir, "factorization cache (default: $MXW_CACHE_DIR)");
        c->add_option("--jobs", job.jobs, "worker threads");
    };
    auto theory = [&](CLI::App* c) {
        c->add_option("--p", job.p, "form degree");
        c->add_option("--kappa", job.kappa, "coupling κ");
        c->add_option("--e", job.e, "electric charge quantum e");
    };
    auto* spaces = app.add_subcommand("spaces", "list built-in spaces with their integral cohomology");
    common(spaces);
    auto* coh = app.add_subcommand("cohomology", "structured cohomology of a model");
    common(coh);
    theory(coh);
    coh->add_option("--model", job.model, "bun, mxw, mxw-tilde, mxw-circ or mxwbf")
        ->check(CLI::IsMember({"bun", "mxw", "mxw-tilde", "mxw-circ", "mxwbf"}));
    coh->add_option("--m", job.m, "magnetic charge quantum m");
    coh->add_option("--lambda", job.lambda, "coupling λ");
    auto* dual = app.add_subcommand("duality", "verify the duality isomorphism over a parameter grid");
    common(dual);
    theory(dual);
    dual->add_option("--kappas", job.kappas, "grid of κ values")->delimiter(',');
    dual->add_option("--es", job.es, "grid of e values")->delimiter(',');
    dual->add_option("--lengths", job.lengths, "grid of circumferences (\"a x b\" per entry)")->delimiter(',');
    dual->add_flag("--corrupt", job.corrupt, "flip the sign of one block and report where verification fails");
    auto* comp = app.add_subcommand("compactify", "pushforward along X × Y -> X with fiber --space");
    common(comp);
    theory(comp);
    comp->add_option("--x", job.x, "base dimension (default 4 - dim Y)")->check(CLI::NonNegativeNumber);
    comp->add_flag("--pert", job.pert, "perturbative pushforward only");
    auto* hpl = app.add_subcommand("hpl-demo", "homotopy transfer on the double complex C(M) ⊗ C(M)");
    common(hpl);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        if (help)
            *help = app.help();
        return std::nullopt;
    } catch (const CLI::ParseError& e) {
        throw InvalidParameter(e.what());
    }
    for (auto* s : app.get_subcommands())
        job.command = s->get_name();
    for (auto& kv : params) {
        auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw InvalidParameter("--param expects key=value, got '" + kv + "'");
        job.params[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return job;
}

DecManifold job_space(const JobSpec& job)
{
    if (!job.mesh.empty()) {
        std::ifstream in(job.mesh);
        if (!in)
            throw InvalidParameter("cannot read mesh file " + job.mesh);
        std::stringstream ss;
        ss << in.rdbuf();
        try {
            return dec_from_json(ss.str());
        } catch (const nlohmann::json::exception& e) {
            throw InvalidParameter(std::string("malformed mesh file: ") + e.what());
        }
    }
    return builtin_space(job.space, job.params);
}

TheoryParams job_params(const JobSpec& job, const DecManifold& m)
{
    TheoryParams t;
    t.p = job.p;
    t.n = m.n;
    t.kappa = parse_rat(job.kappa, "kappa");
    t.e = parse_rat(job.e, "e");
    t.m = parse_rat(job.m, "m");
    t.lambda = parse_rat(job.lambda, "lambda");
    t.validate(m);
    return t;
}

// ---- commands ----

JobResult run_spaces(const JobSpec& job)
{
    std::vector<std::string> names;
    const bool one = !job.mesh.empty() || job.space != "circle" || !job.params.empty();
    if (one)
        names.push_back(job.space);
    else
        names = builtin_names();
    FactorCache cache = FactorCache::for_job(job);
    json list = json::array();
    std::ostringstream md;
    md << "| space | dim | cells | H^k(M, ℤ) |\n|---|---|---|---|\n";
    for (auto& name : names) {
        JobSpec j = job;
        j.space = name;
        const DecManifold m = job_space(j);
        const auto f = cache.get(m);
        json h = json::array();
        std::string hs;
        for (std::size_t k = 0; k < f.integer_cohomology.size(); ++k) {
            json g = group_json(f.integer_cohomology[k]);
            g["degree"] = k;
            h.push_back(g);
            hs += (k ? ", " : "") + f.integer_cohomology[k].str();
        }
        list.push_back({{"name", name}, {"space", m.name}, {"dim", m.n}, {"closed", m.closed}, {"cells", m.cells},
                        {"integer_cohomology", h}});
        std::string cells;
        for (std::size_t k = 0; k < m.cells.size(); ++k)
            cells += (k ? "," : "") + std::to_string(m.cells[k]);
        md << "| " << name << " | " << m.n << " | " << cells << " | " << hs << " |\n";
    }
    return emit(job, json{{"spaces", list}}, md.str(), ExitPass);
}

JobResult run_cohomology(const JobSpec& job)
{
    const DecManifold m = job_space(job);
    if (job.model == "bun") {
        if (job.p < 0 || job.p > m.n)
            throw InvalidParameter("form degree p must satisfy 0 <= p <= n");
    }
    TheoryParams t;
    if (job.model == "bun") {
        t.p = job.p;
        t.n = m.n;
    } else {
        t = job_params(job, m);
    }
    MixedComplex c;
    if (job.model == "bun")
        c = build_bun_nabla(m, job.p);
    else if (job.model == "mxw")
        c = build_maxwell(m, t);
    else if (job.model == "mxw-tilde")
        c = build_maxwell_tilde(m, t);
    else if (job.model == "mxw-circ")
        c = build_maxwell_circ(m, t);
    else if (job.model == "mxwbf")
        c = build_mxwbf(m, t);
    else
        throw InvalidParameter("unknown model " + job.model);
    auto ptr = std::make_shared<const MixedComplex>(std::move(c));
    Cohomology h(ptr);
    json rows = json::array();
    std::ostringstream md;
    md << "## " << job.model << " on " << m.name << " (" << t.str() << ")\n\n| degree | group |\n|---|---|\n";
    for (int k = ptr->lo; k <= ptr->hi; ++k) {
        const auto g = h.group(k);
        json tors = json::array();
        for (auto& d : g.torsion)
            tors.push_back(d.get_str());
        rows.push_back({{"degree", k},
                        {"real_dim", g.real_dim},
                        {"torus_dim", g.torus_dim},
                        {"free_rank", g.free_rank},
                        {"torsion", tors},
                        {"standin_dim", g.standin_dim},
                        {"group", g.str()}});
        md << "| " << k << " | " << (g.trivial() ? "0" : g.str()) << " |\n";
    }
    json checks = json::array();
    std::string why;
    checks.push_back(check("complex squares to zero", ptr->square_zero(&why), why));
    FactorCache cache = FactorCache::for_job(job);
    const auto f = cache.get(m);
    if (job.p + 1 <= m.n)
        checks.push_back(check("magnetic charge lattice H^" + std::to_string(job.p + 1) + "(M, ℤ)", true,
                               f.integer_cohomology[job.p + 1].str()));
    if (job.model != "bun") {
        const auto fd = cache.get(m.dual());
        checks.push_back(check("electric charge lattice H^" + std::to_string(m.n - job.p - 1) + "(M*, ℤ)", true,
                               fd.integer_cohomology[m.n - job.p - 1].str()));
    }
    json j = {{"model", job.model}, {"space", space_json(job, m)}, {"params", params_json(t)}, {"cohomology", rows},
              {"checks", checks}};
    md << checks_markdown(checks);
    return emit(job, j, md.str(), all_pass(checks) ? ExitPass : ExitFail);
}

JobResult run_duality(const JobSpec& job)
{
    std::vector<std::string> kappas = job.kappas.empty() ? std::vector<std::string>{job.kappa} : job.kappas;
    std::vector<std::string> es = job.es.empty() ? std::vector<std::string>{job.e} : job.es;
    std::vector<std::string> lengths = job.lengths.empty() ? std::vector<std::string>{""} : job.lengths;
    struct Point {
        std::string kappa, e, length;
    };
    std::vector<Point> points;
    for (auto& l : lengths)
        for (auto& k : kappas)
            for (auto& e : es)
                points.push_back({k, e, l});
    // validate every point before any work starts
    std::vector<std::pair<DecManifold, TheoryParams>> setups;
    for (auto& pt : points) {
        JobSpec j = job;
        j.kappa = pt.kappa;
        j.e = pt.e;
        if (!pt.length.empty())
            j.params[j.space == "circle" ? "length" : "lengths"] = pt.length;
        DecManifold m = job_space(j);
        TheoryParams t = job_params(j, m);
        setups.emplace_back(std::move(m), std::move(t));
    }
    auto results = run_pool(job, points.size(), [&](std::size_t i) {
        const auto& [m, t] = setups[i];
        const Point& pt = points[i];
        json r = {{"space", m.name}, {"length", pt.length}, {"params", params_json(t)}};
        DualityIso d = duality_iso(m, t);
        r["target"] = params_json(d.target);
        r["self_dual"] = d.self_dual;
        ComplexIso iso = d.iso;
        json fails = json::array();
        if (job.corrupt) {
            // first source piece carrying a nonzero real block
            std::string piece;
            for (int k = iso.fwd.src->lo; k <= iso.fwd.src->hi && piece.empty(); ++k)
                for (auto& pc : iso.fwd.src->rpieces[k - iso.fwd.src->lo])
                    if (pc.size > 0 && !iso.fwd.rr(k).cols_range(pc.offset, pc.size).is_zero()) {
                        piece = pc.name;
                        break;
                    }
            iso = flip_piece_sign(iso, piece);
            r["corrupted_piece"] = piece;
        }
        IsoReport v = verify_iso(iso);
        for (auto& s : v.failures)
            fails.push_back(s);
        r["verify"] = {{"chain_map", v.chain_map},
                       {"composites_identity", v.composites_identity},
                       {"cohomology_iso", v.cohomology_iso},
                       {"failures", fails}};
        bool pass = v.ok();
        if (!job.corrupt) {
            InvolutionReport inv = involution_check(m, t);
            r["involution"] = {{"target_matches_source", inv.target_matches_source},
                               {"blockwise_scalar", inv.blockwise_scalar},
                               {"signs_only", inv.signs_only},
                               {"global_sign", inv.global_sign},
                               {"sign", inv.sign},
                               {"composite_ok", inv.composite.ok()}};
            pass = pass && inv.target_matches_source && inv.blockwise_scalar && inv.composite.ok();
        }
        r["pass"] = pass;
        return r;
    });
    bool pass = true;
    std::ostringstream md;
    md << "| space | lengths | κ | e | target | self-dual | result |\n|---|---|---|---|---|---|---|\n";
    for (auto& r : results) {
        pass = pass && r.at("pass").get<bool>();
        md << "| " << r.at("space").get<std::string>() << " | " << r.at("length").get<std::string>() << " | "
           << r.at("params").at("kappa").get<std::string>() << " | "
           << r.at("params").at("e").get<std::string>() << " | p=" << r.at("target").at("p").get<int>()
           << " κ=" << r.at("target").at("kappa").get<std::string>() << " e=" << r.at("target").at("e").get<std::string>()
           << " | " << (r.at("self_dual").get<bool>() ? "self-dual" : "") << " | "
           << (r.at("pass").get<bool>() ? "PASS" : "FAIL") << " |\n";
        for (auto& f : r.at("verify").at("failures"))
            md << "\n    " << f.get<std::string>() << "\n";
    }
    json j = {{"command", "duality"}, {"points", results}, {"pass", pass}};
    return emit(job, j, md.str(), pass ? ExitPass : ExitFail);
}

JobResult run_compactify(const JobSpec& job)
{
    const DecManifold Y = job_space(job);
    const int x = job.x >= 0 ? job.x : 4 - Y.n;
    if (x < 0)
        throw InvalidParameter("base dimension must be nonnegative");
    const Rat kappa = parse_rat(job.kappa, "kappa"), e = parse_rat(job.e, "e");
    // the factor cache doubles as a validated integral-cohomology lookup for the fiber
    FactorCache cache = FactorCache::for_job(job);
    const auto f = cache.get(Y);
    DecompositionReport r = job.pert ? pushforward_pert(SymbolicBase{x}, Y, job.p, kappa)
                                     : pushforward_full(SymbolicBase{x}, Y, job.p, kappa, e);
    json j = json::parse(to_json(r));
    json checks = json::array();
    checks.push_back(check("transferred ranks equal family ranks", r.ranks_transferred == r.ranks_summands));
    checks.push_back(check("off-family blocks vanish", r.off_family < 1e-10));
    checks.push_back(check("K residual acyclic", r.residual.acyclic,
                           "min singular value " + std::to_string(r.residual.min_singular)));
    std::size_t tors = 0;
    for (auto& g : f.integer_cohomology)
        tors += g.torsion.size();
    if (!job.pert)
        checks.push_back(check("torsion families match H•(Y, ℤ)",
                               std::size_t(std::count_if(r.summands.begin(), r.summands.end(),
                                                         [](auto& s) { return s.kind == FamilyKind::Torsion; })) ==
                                   2 * tors));
    std::string md = to_markdown(r);
    if (!job.pert && x + Y.n == 4 && job.p >= 0 && job.p <= 1 && Y.n >= 1 && Y.n <= 3) {
        auto diff = diff_tables(r, example_tables(job.p, Y.n));
        j["table"] = {{"p", job.p}, {"y", Y.n}, {"diff", diff}, {"beyond", beyond_tables(r)}};
        std::string detail;
        for (auto& d : diff)
            detail += (detail.empty() ? "" : "; ") + d;
        checks.push_back(check("matches the example table (p=" + std::to_string(job.p) + ", y=" + std::to_string(Y.n) + ")",
                               diff.empty(), detail));
    }
    j["checks"] = checks;
    md += checks_markdown(checks);
    return emit(job, j, md, all_pass(checks) ? ExitPass : ExitFail);
}

JobResult run_hpl_demo(const JobSpec& job)
{
    const DecManifold m = job_space(job);
    const int n = m.n;
    DoubleComplexT<Rat> dc;
    dc.dims.assign(n + 1, std::vector<std::size_t>(n + 1));
    dc.v.assign(n + 1, std::vector<RatMatrix>(n + 1));
    dc.h.assign(n + 1, std::vector<RatMatrix>(n + 1));
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
            dc.dims[i][j] = m.ncells(i) * m.ncells(j);
            dc.v[i][j] = kron(RatMatrix::identity(m.ncells(i)), to_rat(m.dz(j)));
            dc.h[i][j] = kron(to_rat(m.dz(i)), RatMatrix::identity(m.ncells(j)));
            if (j == n)
                dc.v[i][j] = RatMatrix(0, dc.dims[i][j]);
            if (i == n)
                dc.h[i][j] = RatMatrix(0, dc.dims[i][j]);
        }
    std::vector<Retract> cols;
    for (int i = 0; i <= n; ++i)
        cols.push_back(harmonic_retract<Rat>(std::make_shared<const MixedComplex>(column_complex(dc, i))));
    auto st = staircase_transfer(dc, cols);
    const MixedComplex& small = *st.retract.small;
    const MixedComplex total = total_complex(dc);
    auto betti = [](const MixedComplex& c) {
        std::vector<std::size_t> b;
        for (int k = c.lo; k <= c.hi; ++k)
            b.push_back(c.term(k).r_dim - rank(c.d_rr(k)) - rank(c.d_rr(k - 1)));
        return b;
    };
    const auto bs = betti(small), bt = betti(total);
    const RetractCheck rc = st.retract.check();
    const RetractCheck hc = hodge_retract<Rat>(m, n).check();
    json checks = json::array();
    checks.push_back(check("transferred cohomology equals the total complex", bs == bt));
    checks.push_back(check("perturbed retract axioms exact", rc.ok(0)));
    checks.push_back(check("Hodge retract axioms exact", hc.ok(0)));
    json j = {{"command", "hpl-demo"},
              {"space", space_json(job, m)},
              {"nilpotency", st.nilpotency},
              {"transferred_betti", bs},
              {"total_betti", bt},
              {"residuals", {{"chain", rc.chain}, {"pi_iota", rc.pi_iota}, {"homotopy", rc.homotopy}, {"side", rc.side}}},
              {"checks", checks}};
    std::ostringstream md;
    md << "## Transfer on C(" << m.name << ") ⊗ C(" << m.name << ")\n\n| degree | transferred | total |\n|---|---|---|\n";
    for (std::size_t k = 0; k < std::max(bs.size(), bt.size()); ++k)
        md << "| " << k << " | " << (k < bs.size() ? bs[k] : 0) << " | " << (k < bt.size() ? bt[k] : 0) << " |\n";
    md << checks_markdown(checks);
    return emit(job, j, md.str(), all_pass(checks) ? ExitPass : ExitFail);
}

JobResult run_job(const JobSpec& job)
{
    auto error = [&](const std::string& kind, const std::string& msg, int code) {
        json j = {{"error", {{"kind", kind}, {"message", msg}, {"exit_code", code}}}};
        std::string md = "error (" + kind + "): " + msg + "\n";
        return JobResult{code, job.format == "markdown" ? md : j.dump(2) + "\n"};
    };
    try {
        if (job.command == "spaces")
            return run_spaces(job);
        if (job.command == "cohomology")
            return run_cohomology(job);
        if (job.command == "duality")
            return run_duality(job);
        if (job.command == "compactify")
            return run_compactify(job);
        if (job.command == "hpl-demo")
            return run_hpl_demo(job);
        return error("invalid_input", "unknown command " + job.command, ExitInvalid);
    } catch (const PatternMismatch& e) {
        return error("verification_failure", e.what(), ExitFail);
    } catch (const AcyclicityFailure& e) {
        return error("verification_failure", e.what(), ExitFail);
    } catch (const SingularBlock& e) {
        return error("verification_failure", e.what(), ExitFail);
    } catch (const MetricNotSPD& e) {
        return error("invalid_input", e.what(), ExitInvalid);
    } catch (const std::invalid_argument& e) {
        return error("invalid_input", e.what(), ExitInvalid);
    } catch (const std::exception& e) {
        return error("internal", e.what(), ExitInternal);
    }
}

int cli_main(int argc, const char* const* argv)
{
    std::optional<JobSpec> job;
    std::string help;
    try {
        job = parse_job(argc, argv, &help);
    } catch (const std::invalid_argument& e) {
        std::cout << json{{"error", {{"kind", "invalid_input"}, {"message", e.what()}, {"exit_code", 2}}}}.dump(2)
                  << "\n";
        return ExitInvalid;
    }
    if (!job) {
        std::cout << help;
        return ExitPass;
    }
    JobResult r = run_job(*job);
    std::cout << r.output;
    return r.exit_code;
}

}  // namespace mxw
