// osc: batch CLI over the oscillation-norm toolkit. Subcommands compute
// maximal functions and oscillation norms over configurable shape bases,
// run the verification checks, measure engulfing constants, and reproduce
// the canonical closed-form examples. Machine-readable output (JSON or
// CSV) goes to stdout or --out; one-line human summaries go to stderr.
// Exit codes: 0 pass, 1 check failure, 2 configuration error.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "osc/engulf.hpp"
#include "osc/expr.hpp"
#include "osc/grid_io.hpp"
#include "osc/operators.hpp"
#include "osc/verify.hpp"

using nlohmann::json;

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, sep)) out.push_back(tok);
    return out;
}

// "0,1x0,2" -> box [0,1] x [0,2]
osc::Box parse_domain(const std::string& text) {
    osc::Box box;
    for (const std::string& axis : split_on(text, 'x')) {
        auto ends = split_on(axis, ',');
        if (ends.size() != 2) throw osc::ConfigError("domain: want lo,hi pairs joined by 'x'");
        box.lo.push_back(std::stod(ends[0]));
        box.hi.push_back(std::stod(ends[1]));
    }
    box.validate();
    return box;
}

std::vector<int> parse_res(const std::string& text, int dim) {
    auto toks = split_on(text, ',');
    std::vector<int> res;
    for (const auto& t : toks) res.push_back(std::stoi(t));
    if (static_cast<int>(res.size()) == 1 && dim > 1) res.assign(dim, res[0]);
    if (static_cast<int>(res.size()) != dim)
        throw osc::ConfigError("res: give one value or one per axis");
    return res;
}

std::vector<int> parse_split(const std::string& text) {
    std::vector<int> split;
    for (const auto& t : split_on(text, ',')) split.push_back(std::stoi(t));
    return split;
}

osc::BasisSpec parse_basis_arg(const std::string& text) {
    if (!text.empty() && text[0] == '@') {
        std::ifstream in(text.substr(1));
        if (!in) throw osc::ConfigError("cannot open basis file " + text.substr(1));
        std::stringstream ss;
        ss << in.rdbuf();
        return osc::BasisSpec::parse(ss.str());
    }
    return osc::BasisSpec::parse(text);
}

void emit(const json& payload, const std::string& out_path) {
    std::string text = payload.dump(2);
    text += "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(out_path);
        if (!out) throw osc::ConfigError("cannot open for writing: " + out_path);
        out << text;
    }
}

std::string csv_escape(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

// flat table: one row per report, columns from scalar fields
void emit_csv(const std::vector<json>& rows, const std::string& out_path) {
    std::vector<std::string> cols;
    for (const auto& r : rows)
        for (auto it = r.begin(); it != r.end(); ++it)
            if (!it.value().is_structured() &&
                std::find(cols.begin(), cols.end(), it.key()) == cols.end())
                cols.push_back(it.key());
    std::ostringstream os;
    for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
    os << "\n";
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            os << (c ? "," : "");
            if (r.contains(cols[c])) os << csv_escape(r[cols[c]]);
        }
        os << "\n";
    }
    if (out_path.empty()) {
        std::cout << os.str();
    } else {
        std::ofstream out(out_path);
        if (!out) throw osc::ConfigError("cannot open for writing: " + out_path);
        out << os.str();
    }
}

struct CommonArgs {
    std::string fn, fn_name;
    std::uint64_t random_seed = 0;
    bool has_random = false;
    std::string domain = "0,1x0,1";
    std::string res = "64";
    double clip = 0.0;
    int threads = 0;
    bool no_meta = false;
    std::string out_path;
    std::string format = "json";

    void attach(CLI::App* cmd, bool with_fn = true) {
        if (with_fn) {
            cmd->add_option("--fn", fn, "expression for f (see docs/grammar.md)");
            cmd->add_option("--fn-name", fn_name, "catalog function name for f");
            cmd->add_option("--random-seed", random_seed,
                            "seeded random smooth trigonometric sample for f")
                ->each([this](const std::string&) { has_random = true; });
        }
        cmd->add_option("--domain", domain, "box, e.g. 0,1x0,2");
        cmd->add_option("--res", res, "cells per axis, e.g. 256 or 256,128");
        cmd->add_option("--clip", clip,
                        "admit non-finite samples by clipping at this threshold (default: reject)");
        cmd->add_option("--threads", threads, "worker threads (0 = OSC_THREADS or all cores)");
        cmd->add_flag("--no-meta", no_meta, "omit runtimes so outputs are byte-stable");
        cmd->add_option("--out", out_path, "write output here instead of stdout");
        cmd->add_option("--format", format, "json (default) or csv")
            ->check(CLI::IsMember({"json", "csv"}));
    }

    osc::GridShell shell() const {
        osc::Box box = parse_domain(domain);
        return osc::GridShell(box, parse_res(res, box.dim()));
    }

    osc::SamplePolicy policy() const {
        return clip > 0.0 ? osc::SamplePolicy::clipping(clip) : osc::SamplePolicy::rejecting();
    }

    osc::GridFunction build(const osc::GridShell& sh) const {
        if (has_random) return osc::random_smooth(sh, random_seed);
        if (!fn_name.empty()) return osc::sample(osc::catalog_expr(fn_name, sh.dim), sh, policy());
        if (!fn.empty()) return osc::sample(fn, sh, policy());
        throw osc::ConfigError("give one of --fn, --fn-name, --random-seed");
    }

    std::string fn_id() const {
        if (has_random) return "random_smooth(" + std::to_string(random_seed) + ")";
        return fn_name.empty() ? fn : fn_name;
    }
};

osc::Basis compile_product(const osc::BasisSpec& spec, const std::vector<int>& split,
                           const osc::GridShell& shell) {
    // rectangles with an explicit split become a product of per-factor
    // interval/rectangle bases so the factor structure is available
    if (spec.kind == osc::BasisKind::rectangles && !split.empty()) {
        std::vector<osc::BasisSpec> factors;
        for (int p : split) {
            osc::BasisSpec f = spec;
            f.kind = p == 1 ? osc::BasisKind::intervals : osc::BasisKind::rectangles;
            factors.push_back(f);
        }
        return osc::Basis::compile(osc::product_spec(factors, split), shell);
    }
    if (spec.kind == osc::BasisKind::cylinders || spec.kind == osc::BasisKind::product)
        return osc::Basis::compile(spec, shell);
    throw osc::ConfigError(
        "rectangular norms need a product-structured basis: rectangles plus --split, cylinders, "
        "or an explicit product spec");
}

osc::Shape window_shape(const std::string& text, const osc::GridShell& g) {
    osc::Box w = parse_domain(text);
    if (w.dim() != g.dim) throw osc::ConfigError("--shape dimension does not match the grid");
    osc::Shape s;
    s.box.dim = g.dim;
    for (int a = 0; a < g.dim; ++a) {
        int lo = static_cast<int>(std::llround((w.lo[a] - g.domain.lo[a]) / g.step[a]));
        int hi = static_cast<int>(std::llround((w.hi[a] - g.domain.lo[a]) / g.step[a]));
        lo = std::clamp(lo, 0, g.res[a] - 1);
        hi = std::clamp(hi, lo + 1, g.res[a]);
        s.box.lo[a] = lo;
        s.box.hi[a] = hi;
    }
    s.cells = s.box.cells();
    return s;
}

int cmd_norm(const CommonArgs& common, const std::string& kind, double p,
             const std::string& basis_arg, const std::string& split_arg, int factor,
             const std::string& shape_arg, int ladder) {
    std::vector<json> rows;
    std::vector<int> base_res;
    osc::Box box = parse_domain(common.domain);
    base_res = parse_res(common.res, box.dim());

    for (int step = 0; step < std::max(1, ladder); ++step) {
        std::vector<int> res = base_res;
        for (int& r : res) {
            r >>= step;
            if (r < 2) throw osc::ConfigError("--ladder: resolution underflow");
        }
        osc::GridShell shell(box, res);
        osc::GridFunction f = common.build(shell);
        std::vector<int> split = split_arg.empty() ? std::vector<int>(shell.dim, 1)
                                                   : parse_split(split_arg);
        osc::BasisSpec spec = parse_basis_arg(basis_arg);
        osc::OscReport rep;

        if (!shape_arg.empty()) {
            // fixed single-window statistic instead of a supremum
            osc::Shape whole = window_shape(shape_arg, shell);
            bool need_min = kind != "bmo" && kind != "rec_bmo";
            osc::Tables tables(f, kind == "bmo" && p == 2.0, need_min);
            osc::StatEngine engine(tables);
            osc::FactorSplit fs = osc::FactorSplit::of(split);
            rep.kind = kind;
            rep.p = p;
            rep.argmax = whole;
            rep.basis_json = {{"kind", "fixed_window"}};
            if (kind == "bmo") {
                rep.value = engine.bmo(whole, p);
            } else if (kind == "blo") {
                rep.value = engine.blo(whole);
            } else {
                std::vector<osc::Shape> parts = osc::factor_shape(whole, fs);
                rep.argmax_factors = parts;
                if (kind == "rec_bmo") rep.value = engine.rec_bmo(whole, parts, fs);
                else if (kind == "rec_blo") rep.value = engine.rec_blo(whole, parts, fs);
                else if (kind == "rec_blo_naive") rep.value = engine.rec_blo_naive(whole, parts, fs);
                else throw osc::ConfigError("--shape works with bmo, blo and the rec_* kinds");
            }
            rep.res.assign(shell.res.begin(), shell.res.begin() + shell.dim);
            rep.domain_lo = shell.domain.lo;
            rep.domain_hi = shell.domain.hi;
        } else if (kind == "bmo") {
            rep = osc::bmo_norm(f, osc::Basis::compile(spec, shell), p, common.threads);
        } else if (kind == "blo") {
            rep = osc::blo_norm(f, osc::Basis::compile(spec, shell), common.threads);
        } else if (kind == "lower_bmo" || kind == "lower_blo") {
            osc::FactorSplit fs = osc::FactorSplit::of(split);
            if (kind == "lower_bmo")
                rep = osc::lower_bmo(f, fs, factor, spec, p, common.threads);
            else
                rep = osc::lower_blo(f, fs, factor, spec, common.threads);
        } else if (kind == "rec_bmo" || kind == "rec_blo" || kind == "rec_blo_naive") {
            osc::Basis product = compile_product(spec, split, shell);
            if (kind == "rec_bmo") rep = osc::rec_bmo_norm(f, product, common.threads);
            else if (kind == "rec_blo") rep = osc::rec_blo_norm(f, product, common.threads);
            else rep = osc::rec_blo_naive_norm(f, product, common.threads);
        } else {
            throw osc::ConfigError("unknown norm kind '" + kind + "'");
        }
        rep.fn = common.fn_id();
        rows.push_back(rep.to_json(common.no_meta));
        std::cerr << kind << " value " << rep.value << " at res " << res[0] << "\n";
    }

    if (common.format == "csv") {
        emit_csv(rows, common.out_path);
    } else {
        emit(rows.size() == 1 ? rows[0] : json(rows), common.out_path);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "osc: geometric maximal operators and oscillation norms (BMO/BLO and their "
        "rectangular and lower-dimensional variants) over shape bases on grids"};
    app.require_subcommand(1);

    // ---- norm
    CommonArgs norm_args;
    std::string norm_kind = "bmo";
    double norm_p = 1.0;
    std::string norm_basis = "rectangles";
    std::string norm_split, norm_shape;
    int norm_factor = 0, norm_ladder = 1;
    auto* norm = app.add_subcommand(
        "norm",
        "oscillation norms: bmo (sup of p-mean oscillation over basis shapes), blo (mean minus "
        "essential infimum), lower_bmo/lower_blo (supremum over slices of factor norms), rec_bmo "
        "(two-factor oscillation against the marginal-mean ansatz), rec_blo (mean of f minus the "
        "largest slicewise infimum), rec_blo_naive (joint-infimum diagnostic variant)");
    norm_args.attach(norm);
    norm->add_option("--kind", norm_kind,
                     "bmo | blo | lower_bmo | lower_blo | rec_bmo | rec_blo | rec_blo_naive");
    norm->add_option("--p", norm_p, "exponent for bmo/lower_bmo (p >= 1)");
    norm->add_option("--basis", norm_basis, "basis spec: name, inline JSON, or @file");
    norm->add_option("--split", norm_split, "factor split, e.g. 1,1 (default: all ones)");
    norm->add_option("--factor", norm_factor, "factor index for lower_bmo/lower_blo");
    norm->add_option("--shape", norm_shape,
                     "fixed window (domain units, e.g. 0,1x1,2): statistic of that one shape");
    norm->add_option("--ladder", norm_ladder, "also run at res/2, res/4, ... (count)");

    // ---- maximal
    CommonArgs max_args;
    std::string max_basis = "cubes";
    std::string max_mode = "abs";
    auto* maxc = app.add_subcommand(
        "maximal",
        "geometric maximal function: per cell, the largest basis-shape average of |f| "
        "(or of f with --mode signed)");
    max_args.attach(maxc);
    maxc->add_option("--basis", max_basis, "basis spec: name, inline JSON, or @file");
    maxc->add_option("--mode", max_mode, "abs | signed")->check(CLI::IsMember({"abs", "signed"}));

    // ---- verify
    CommonArgs ver_args;
    std::string ver_check, ver_suite, ver_config, ver_basis, ver_split, ver_granularity;
    double ver_p = 0.0;
    bool ver_rectangular = false;
    std::uint64_t ver_gseed = 0;
    bool ver_has_gseed = false;
    auto* ver = app.add_subcommand(
        "verify",
        "inequality checks: semilattice (norm of max(f,g) vs sum), bennett (maximal function "
        "lands in lower oscillation over engulfing bases), product_bmo/product_blo "
        "(decomposition chains), rec_inclusions (rectangular norm bounds), strong_product "
        "(maximal function lands in rectangular lower oscillation)");
    ver_args.attach(ver);
    ver->add_option("--check", ver_check, "check name (see subcommand description)");
    ver->add_option("--suite", ver_suite, "JSON manifest (array of check configs)");
    ver->add_option("--config", ver_config, "inline JSON check config");
    ver->add_option("--basis", ver_basis, "basis spec for the check");
    ver->add_option("--split", ver_split, "factor split, e.g. 1,1");
    ver->add_option("--granularity", ver_granularity, "granularity for derived factor bases");
    ver->add_option("--p", ver_p, "exponent where applicable");
    ver->add_flag("--rectangular", ver_rectangular, "rectangular variant (semilattice)");
    ver->add_option("--g-seed", ver_gseed, "random seed for the second function g")
        ->each([&](const std::string&) { ver_has_gseed = true; });

    // ---- engulf
    CommonArgs eng_args;
    std::string eng_basis = "cubes";
    std::int64_t eng_budget = 200000000;
    std::uint64_t eng_seed = 20240901;
    std::string eng_witness;
    double eng_cap_d = 0.0, eng_cap_e = 0.0;
    auto* eng = app.add_subcommand(
        "engulf",
        "empirical engulfing constants: the doubling ratio c_d and the smallest-cover ratio "
        "c_e over qualifying shape pairs; --witness-H runs the rectangle blow-up family");
    eng_args.attach(eng, false);
    eng->add_option("--basis", eng_basis, "basis spec: name, inline JSON, or @file");
    eng->add_option("--budget", eng_budget, "max pairs to enumerate before sampling");
    eng->add_option("--seed", eng_seed, "sampling seed (recorded in the report)");
    eng->add_option("--cap-d", eng_cap_d, "pass cap for c_d (default 2^n)");
    eng->add_option("--cap-e", eng_cap_e, "pass cap for c_e (default 6^n)");
    eng->add_option("--witness-H", eng_witness, "comma list of aspect ratios, e.g. 2,4,8,16");

    // ---- reproduce
    CommonArgs rep_args;
    int rep_res = 1024;
    auto* rep = app.add_subcommand(
        "reproduce",
        "run the canonical closed-form reproductions: the pi*L/18 and L/3 window statistics, "
        "the 2*log(2)-1 lower bound, cube engulfing constants, rectangle blow-up");
    rep_args.attach(rep, false);
    rep->add_option("--window-res", rep_res, "resolution for the window statistics");

    // ---- dump
    CommonArgs dump_args;
    auto* dmp = app.add_subcommand(
        "dump", "sample a function onto a grid and write it as CSV or a JSON envelope");
    dump_args.attach(dmp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (norm->parsed()) {
            return cmd_norm(norm_args, norm_kind, norm_p, norm_basis, norm_split, norm_factor,
                            norm_shape, norm_ladder);
        }
        if (maxc->parsed()) {
            osc::GridShell shell = max_args.shell();
            osc::GridFunction f = max_args.build(shell);
            osc::Basis basis = osc::Basis::compile(parse_basis_arg(max_basis), shell);
            osc::GridFunction mf = osc::maximal(
                f, basis,
                max_mode == "abs" ? osc::MaximalMode::abs : osc::MaximalMode::signed_avg,
                max_args.threads);
            if (max_args.out_path.empty()) {
                if (max_args.format == "csv") osc::dump_csv(mf, std::cout);
                else osc::dump_json(mf, std::cout);
            } else {
                osc::dump_grid_file(mf, max_args.out_path);
            }
            std::cerr << "maximal function over " << basis.size() << " shapes\n";
            return 0;
        }
        if (ver->parsed()) {
            std::vector<osc::VerifyReport> reports;
            if (!ver_suite.empty()) {
                std::ifstream in(ver_suite);
                if (!in) throw osc::ConfigError("cannot open suite " + ver_suite);
                json manifest;
                in >> manifest;
                reports = osc::run_suite(manifest, ver_args.threads);
            } else {
                json cfg;
                if (!ver_config.empty()) {
                    cfg = json::parse(ver_config);
                } else {
                    if (ver_check.empty())
                        throw osc::ConfigError("give --check, --config, or --suite");
                    cfg["check"] = ver_check;
                    osc::Box box = parse_domain(ver_args.domain);
                    cfg["domain"] = {{"lo", box.lo}, {"hi", box.hi}};
                    cfg["res"] = parse_res(ver_args.res, box.dim());
                    if (!ver_args.fn.empty()) cfg["fn"] = ver_args.fn;
                    if (!ver_args.fn_name.empty()) cfg["fn_name"] = ver_args.fn_name;
                    if (ver_args.has_random) cfg["random_seed"] = ver_args.random_seed;
                    if (ver_args.clip > 0) cfg["clip"] = ver_args.clip;
                    if (!ver_basis.empty()) cfg["basis"] = parse_basis_arg(ver_basis).to_json();
                    if (!ver_split.empty()) cfg["split"] = parse_split(ver_split);
                    if (!ver_granularity.empty()) cfg["granularity"] = ver_granularity;
                    if (ver_p > 0) cfg["p"] = ver_p;
                    if (ver_rectangular) cfg["rectangular"] = true;
                    if (ver_has_gseed) cfg["g_seed"] = ver_gseed;
                }
                reports.push_back(osc::run_check(cfg, ver_args.threads));
            }
            bool all_pass = true;
            std::vector<json> rows;
            for (const auto& r : reports) {
                bool counts = !r.degenerate;
                all_pass = all_pass && (r.passed || !counts);
                rows.push_back(r.to_json(ver_args.no_meta));
                std::cerr << (r.passed ? "[PASS] " : "[FAIL] ") << r.check_id << " lhs " << r.lhs
                          << " rhs " << r.rhs << "\n";
                if (!r.passed) std::cerr << "  reproduce with config: " << r.config.dump() << "\n";
            }
            if (ver_args.format == "csv") emit_csv(rows, ver_args.out_path);
            else emit(json(rows), ver_args.out_path);
            return all_pass ? 0 : 1;
        }
        if (eng->parsed()) {
            if (!eng_witness.empty()) {
                std::vector<int> hs;
                for (const auto& t : split_on(eng_witness, ',')) hs.push_back(std::stoi(t));
                std::vector<double> ratios = osc::rectangle_blowup_ratios(hs);
                json j;
                j["basis"] = parse_basis_arg(eng_basis).to_json();
                j["H"] = hs;
                j["ratios"] = ratios;
                bool grows = true;
                for (std::size_t i = 0; i < hs.size(); ++i) {
                    if (ratios[i] < hs[i]) grows = false;
                    if (i && ratios[i] <= ratios[i - 1]) grows = false;
                }
                j["passed"] = false;  // engulfing fails for this family by design
                j["blowup_reproduced"] = grows;
                emit(j, eng_args.out_path);
                std::cerr << "rectangle blow-up ratios grow without bound; engulfing fails\n";
                return grows ? 0 : 1;
            }
            osc::GridShell shell = eng_args.shell();
            osc::Basis basis = osc::Basis::compile(parse_basis_arg(eng_basis), shell);
            osc::EngulfReport er =
                osc::check_engulfing(basis, eng_budget, eng_cap_d, eng_cap_e, eng_seed);
            emit(er.to_json(), eng_args.out_path);
            std::cerr << (er.passed ? "[PASS] " : "[FAIL] ") << "c_d " << er.c_d_emp << " c_e "
                      << er.c_e_emp << " over " << er.pairs_qualifying << " qualifying pairs\n";
            return er.passed ? 0 : 1;
        }
        if (rep->parsed()) {
            osc::ReproduceOptions opt;
            opt.res = rep_res;
            opt.threads = rep_args.threads;
            auto reports = osc::reproduce_examples(opt);
            bool all_pass = true;
            std::vector<json> rows;
            for (const auto& r : reports) {
                all_pass = all_pass && r.passed;
                rows.push_back(r.to_json(rep_args.no_meta));
                std::cerr << (r.passed ? "[PASS] " : "[FAIL] ") << r.check_id << "\n";
            }
            if (rep_args.format == "csv") emit_csv(rows, rep_args.out_path);
            else emit(json(rows), rep_args.out_path);
            return all_pass ? 0 : 1;
        }
        if (dmp->parsed()) {
            osc::GridShell shell = dump_args.shell();
            osc::GridFunction f = dump_args.build(shell);
            if (dump_args.out_path.empty()) {
                if (dump_args.format == "csv") osc::dump_csv(f, std::cout);
                else osc::dump_json(f, std::cout);
            } else {
                osc::dump_grid_file(f, dump_args.out_path);
            }
            return 0;
        }
    } catch (const osc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
