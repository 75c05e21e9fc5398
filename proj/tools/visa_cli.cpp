// visa: scene-graph evaluation and memory-analysis toolkit (single binary).
//
// Subcommands: validate, evaluate, simulate-memory, sweep-lambda, infotheory,
// generate, pipeline-demo. Exit codes: 0 success, 1 domain/data error,
// 2 usage error. Every JSON report embeds the toolkit version, the fully
// resolved configuration, and the seed, so identical argv + inputs produce
// byte-identical outputs.

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "visa/visa.hpp"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;
using namespace visa;

// --------------------------------------------------------------------------
// Plumbing helpers

void emit(const std::string& out, const std::string& content) {
    if (out == "-") {
        std::cout << content;
        return;
    }
    io::write_text_file(out, content);
}

json load_json_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j;
    in >> j;
    return j;
}

// Overrides `var` from the config file unless the flag was given explicitly
// (explicit flags win over the config file).
template <typename T>
void merge_config(const json& cfg, const char* key, const CLI::Option* opt, T& var) {
    if (opt != nullptr && opt->count() > 0) return;
    if (cfg.contains(key)) var = cfg.at(key).template get<T>();
}

// Scalar-or-list config/flag value broadcast to `dim` coordinates.
Vec broadcast(const std::vector<double>& v, std::size_t dim, const char* what) {
    if (v.size() == dim) return v;
    if (v.size() == 1) return Vec(dim, v[0]);
    throw std::invalid_argument(std::string(what) + ": expected 1 or " + std::to_string(dim) +
                                " values, got " + std::to_string(v.size()));
}

sg::Vocabulary resolve_vocabulary(const std::string& path) {
    return path.empty() ? io::default_vocabulary() : io::load_vocabulary(path);
}

ordered_json vec_json(const Vec& v) { return ordered_json(v); }

// --------------------------------------------------------------------------
// validate

struct ValidateArgs {
    std::string data, vocab, out = "-";
};

int run_validate(const ValidateArgs& a) {
    sg::Vocabulary vocab = resolve_vocabulary(a.vocab);
    io::ValidationReport rep = io::validate_file(a.data, vocab);
    ordered_json j;
    j["toolkit_version"] = kVersion;
    j["config"]["data"] = a.data;
    j["config"]["vocab"] = a.vocab.empty() ? "<builtin>" : a.vocab;
    j["frames"] = rep.frames;
    j["ok"] = rep.ok();
    j["errors"] = rep.errors;
    emit(a.out, j.dump(2) + "\n");
    if (!rep.ok()) {
        for (const auto& e : rep.errors) std::cerr << a.data << ": " << e << "\n";
        return 1;
    }
    return 0;
}

// --------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
    std::string gt, pred, vocab, freq, out = "-", csv;
    std::string mode = "sgcls", constraint = "with";
    std::vector<int> ks = {10, 20, 50};
    double iou = 0.5, semi_threshold = 0.9;
    bool macro_per_frame = false;
};

metrics::TaskMode parse_task(const std::string& s) {
    if (s == "predcls") return metrics::TaskMode::kPredCls;
    if (s == "sgcls") return metrics::TaskMode::kSgCls;
    if (s == "sgdet") return metrics::TaskMode::kSgDet;
    throw std::invalid_argument("unknown task mode: " + s);
}

metrics::ConstraintMode parse_constraint(const std::string& s) {
    if (s == "with") return metrics::ConstraintMode::kWith;
    if (s == "semi") return metrics::ConstraintMode::kSemi;
    if (s == "no") return metrics::ConstraintMode::kNo;
    throw std::invalid_argument("unknown constraint mode: " + s);
}

int run_evaluate(const EvaluateArgs& a) {
    sg::Vocabulary vocab = resolve_vocabulary(a.vocab);
    sg::Dataset gt = io::load_scene_graphs(a.gt, vocab);
    sg::Dataset pred = io::load_scene_graphs(a.pred, vocab);

    metrics::EvalConfig cfg;
    cfg.task = parse_task(a.mode);
    cfg.constraint = parse_constraint(a.constraint);
    cfg.ks = a.ks;
    cfg.iou_threshold = a.iou;
    cfg.semi_threshold = a.semi_threshold;
    cfg.macro_per_frame = a.macro_per_frame;

    metrics::MetricReport rep = metrics::mean_recall_at_k(pred, gt, cfg, vocab.predicate_count());
    std::optional<metrics::SplitReport> splits;
    if (!a.freq.empty())
        splits = metrics::split_report(rep, io::load_frequency_table(a.freq, vocab));

    io::RunContext ctx;
    ctx.version = kVersion;
    ctx.seed = 0;  // evaluation is deterministic and unseeded
    ctx.resolved_config["gt"] = a.gt;
    ctx.resolved_config["pred"] = a.pred;
    ctx.resolved_config["mode"] = a.mode;
    ctx.resolved_config["constraint"] = a.constraint;
    ctx.resolved_config["k"] = a.ks;
    ctx.resolved_config["iou"] = a.iou;
    ctx.resolved_config["semi_threshold"] = a.semi_threshold;
    ctx.resolved_config["freq"] = a.freq;
    ctx.resolved_config["vocab"] = a.vocab.empty() ? "<builtin>" : a.vocab;

    emit(a.out, io::metric_report_to_json(rep, splits, vocab, ctx).dump(2) + "\n");
    if (!a.csv.empty()) {
        std::ostringstream csv;
        io::write_metric_report_csv(rep, vocab, csv);
        emit(a.csv, csv.str());
    }
    return 0;
}

// --------------------------------------------------------------------------
// simulate-memory / sweep-lambda

struct MemoryArgs {
    std::string out = "-", config, format = "csv", mode = "sgcls";
    double lambda = -1.0;  // resolved from mode when unset
    std::size_t dim = 8, steps = 1000, trials = 100;
    std::vector<double> sigma = {1.0}, delta = {0.0}, base = {0.0};
    std::uint64_t seed = 7;
    std::vector<double> grid;  // sweep only
    bool no_empirical = false;
};

double default_lambda(const std::string& mode) {
    if (mode == "sgdet") return 0.06;
    if (mode == "sgcls" || mode == "predcls") return 0.04;
    throw std::invalid_argument("unknown task mode: " + mode);
}

mgsm::NoiseModel make_model(const MemoryArgs& a) {
    mgsm::NoiseModel model;
    model.base_feature = broadcast(a.base, a.dim, "base");
    model.sigma_diag = broadcast(a.sigma, a.dim, "sigma");
    model.drift = broadcast(a.delta, a.dim, "delta");
    model.validate();
    return model;
}

ordered_json memory_config_json(const MemoryArgs& a, double lambda) {
    ordered_json c;
    c["mode"] = a.mode;
    c["lambda"] = lambda;
    c["dim"] = a.dim;
    c["sigma"] = a.sigma;
    c["delta"] = a.delta;
    c["base"] = a.base;
    c["steps"] = a.steps;
    c["trials"] = a.trials;
    c["seed"] = a.seed;
    return c;
}

int run_simulate_memory(const MemoryArgs& a) {
    double lambda = a.lambda >= 0.0 ? a.lambda : default_lambda(a.mode);
    mgsm::SimulationTrace trace =
        mgsm::simulate_memory(make_model(a), lambda, a.steps, a.trials, RngStream(a.seed));
    if (a.format == "csv") {
        std::ostringstream csv;
        io::write_trace_csv(trace, csv);
        emit(a.out, csv.str());
        return 0;
    }
    ordered_json j;
    j["toolkit_version"] = kVersion;
    j["seed"] = a.seed;
    j["config"] = memory_config_json(a, lambda);
    j["tail_variance"] = vec_json(trace.tail_variance());
    j["tail_bias"] = vec_json(trace.tail_bias());
    j["analytic_stationary_variance"] = vec_json(
        mgsm::stationary_variance(lambda, broadcast(a.sigma, a.dim, "sigma")));
    j["analytic_steady_state_bias"] = vec_json(
        mgsm::steady_state_bias(broadcast(a.delta, a.dim, "delta"), lambda));
    emit(a.out, j.dump(2) + "\n");
    return 0;
}

int run_sweep_lambda(const MemoryArgs& a) {
    std::vector<double> grid = a.grid;
    if (grid.empty()) grid = {0.005, 0.01, 0.02, 0.04, 0.06, 0.08, 0.1};
    std::vector<mgsm::LambdaSweepRow> rows = mgsm::sweep_lambda(
        grid, make_model(a), a.steps, a.trials, RngStream(a.seed), !a.no_empirical);
    if (a.format == "csv") {
        std::ostringstream csv;
        io::write_sweep_csv(rows, csv);
        emit(a.out, csv.str());
        return 0;
    }
    ordered_json j;
    j["toolkit_version"] = kVersion;
    j["seed"] = a.seed;
    j["config"] = memory_config_json(a, -1.0);
    j["config"].erase("lambda");
    j["config"]["grid"] = grid;
    j["config"]["empirical"] = !a.no_empirical;
    j["rows"] = ordered_json::array();
    for (const auto& r : rows) {
        ordered_json rj;
        rj["lambda"] = r.lambda;
        rj["bias_sq"] = r.bias_sq;
        rj["variance"] = r.variance;
        rj["total"] = r.total;
        if (r.empirical_total) {
            rj["empirical_bias_sq"] = *r.empirical_bias_sq;
            rj["empirical_variance"] = *r.empirical_variance;
            rj["empirical_total"] = *r.empirical_total;
        }
        j["rows"].push_back(std::move(rj));
    }
    j["argmin_analytic_lambda"] = rows[mgsm::argmin_analytic(rows)].lambda;
    if (!a.no_empirical)
        j["argmin_empirical_lambda"] = rows[mgsm::argmin_empirical(rows)].lambda;
    Vec drift = broadcast(a.delta, a.dim, "delta");
    double sigma_bar = mean(broadcast(a.sigma, a.dim, "sigma"));
    if (dot(drift, drift) > 0.0 && sigma_bar > 0.0)
        j["optimal_lambda_closed_form"] = mgsm::optimal_lambda(drift, sigma_bar);
    emit(a.out, j.dump(2) + "\n");
    return 0;
}

// --------------------------------------------------------------------------
// infotheory

struct InfoArgs {
    std::string gt, pred, vocab, out = "-", csv;
    std::vector<int> class_pair;  // optional subject/object class filter
    bool bits = false;
};

int run_infotheory(const InfoArgs& a) {
    sg::Vocabulary vocab = resolve_vocabulary(a.vocab);
    sg::Dataset gt = io::load_scene_graphs(a.gt, vocab);
    sg::Dataset pred = io::load_scene_graphs(a.pred, vocab);

    std::optional<std::pair<int, int>> filter;
    if (!a.class_pair.empty()) {
        if (a.class_pair.size() != 2)
            throw std::invalid_argument("--class-pair expects exactly two class ids");
        filter = std::make_pair(a.class_pair[0], a.class_pair[1]);
    }
    infotheory::ConfusionMatrix cm =
        infotheory::build_confusion_matrix(pred, gt, vocab.predicates(), filter);
    long total = cm.total();
    if (total == 0)
        throw std::domain_error("infotheory: no GT relation instance has a matching prediction");

    // Joint P(true, predicted) from the confusion counts.
    Matrix joint(cm.labels.size(), cm.labels.size());
    for (std::size_t r = 0; r < cm.counts.size(); ++r)
        for (std::size_t c = 0; c < cm.counts[r].size(); ++c)
            joint(r, c) = static_cast<double>(cm.counts[r][c]) / static_cast<double>(total);
    infotheory::JointTable table{cm.labels, cm.labels, joint};
    infotheory::Distribution true_dist{cm.labels, table.marginal_rows()};
    infotheory::Distribution pred_dist{cm.labels, table.marginal_cols()};

    double h_true = infotheory::entropy(true_dist);
    double h_pred = infotheory::entropy(pred_dist);
    double h_cond = infotheory::conditional_entropy(table);
    double scale_f = a.bits ? infotheory::nats_to_bits(1.0) : 1.0;

    ordered_json j;
    j["toolkit_version"] = kVersion;
    j["config"]["gt"] = a.gt;
    j["config"]["pred"] = a.pred;
    j["config"]["vocab"] = a.vocab.empty() ? "<builtin>" : a.vocab;
    j["config"]["units"] = a.bits ? "bits" : "nats";
    if (filter) j["config"]["class_pair"] = a.class_pair;
    j["instances"] = total;
    j["unmatched_gt_instances"] = cm.unmatched;
    j["entropy_true"] = h_true * scale_f;
    j["entropy_predicted"] = h_pred * scale_f;
    j["conditional_entropy_true_given_predicted"] = h_cond * scale_f;
    j["mutual_information"] = (h_true - h_cond) * scale_f;
    // KL(true || predicted) is undefined when the prediction marginal misses
    // part of the GT support; a hard support violation is reported, not hidden.
    try {
        j["kl_true_vs_predicted"] = infotheory::kl_divergence(true_dist, pred_dist) * scale_f;
    } catch (const std::domain_error& e) {
        j["kl_true_vs_predicted"] = nullptr;
        j["kl_support_violation"] = e.what();
    }
    ordered_json counts = ordered_json::array();
    for (const auto& row : cm.counts) counts.push_back(row);
    j["confusion"]["labels"] = cm.labels;
    j["confusion"]["counts"] = std::move(counts);
    emit(a.out, j.dump(2) + "\n");

    if (!a.csv.empty()) {
        std::ostringstream csv;
        io::write_confusion_csv(cm, csv);
        emit(a.csv, csv.str());
    }
    return 0;
}

// --------------------------------------------------------------------------
// generate

struct GenerateArgs {
    std::string out_gt, out_pred, out_freq, out_vocab, vocab, out = "-";
    io::SyntheticConfig cfg;
};

int run_generate(const GenerateArgs& a) {
    sg::Vocabulary vocab = resolve_vocabulary(a.vocab);
    io::SyntheticResult syn = io::generate_synthetic(a.cfg, vocab);
    io::write_scene_graphs(syn.gt, vocab, a.out_gt, /*with_scores=*/false);
    io::write_scene_graphs(syn.pred, vocab, a.out_pred, /*with_scores=*/true);
    io::write_frequency_table(syn.freq, vocab, a.out_freq);
    if (!a.out_vocab.empty()) io::write_vocabulary(vocab, a.out_vocab);

    std::size_t gt_rel = 0, pred_rel = 0;
    for (const auto& f : syn.gt) gt_rel += f.relations.size();
    for (const auto& f : syn.pred) pred_rel += f.relations.size();

    ordered_json j;
    j["toolkit_version"] = kVersion;
    j["seed"] = a.cfg.seed;
    j["config"]["videos"] = a.cfg.videos;
    j["config"]["frames_per_video"] = a.cfg.frames_per_video;
    j["config"]["entities_per_frame"] = a.cfg.entities_per_frame;
    j["config"]["zipf_exponent"] = a.cfg.zipf_exponent;
    j["config"]["noise"] = a.cfg.noise;
    j["frames"] = syn.gt.size();
    j["gt_relations"] = gt_rel;
    j["pred_relations"] = pred_rel;
    j["files"]["gt"] = a.out_gt;
    j["files"]["pred"] = a.out_pred;
    j["files"]["freq"] = a.out_freq;
    emit(a.out, j.dump(2) + "\n");
    return 0;
}

// --------------------------------------------------------------------------
// pipeline-demo

struct PipelineArgs {
    std::string out = "-", mode = "sgcls";
    double lambda = -1.0;
    std::size_t rounds = 1, steps = 24;
    std::uint64_t seed = 7;
};

int run_pipeline_demo(const PipelineArgs& a) {
    double lambda = a.lambda >= 0.0 ? a.lambda : default_lambda(a.mode);
    sg::Vocabulary vocab = io::default_vocabulary();
    irg::IrgConfig cfg;  // default widths, d_v = 16
    RngStream rng(a.seed);

    // Two entities (person, sofa) with drifting noisy visual features.
    auto make_entity = [&](int id, const std::string& cls, sg::Box box,
                           std::uint64_t stream) {
        irg::EntityFeature e;
        e.id = id;
        e.cls = vocab.object_id(cls);
        e.box = box;
        e.semantic = irg::pseudo_glove(cls, cfg.d_s, a.seed);

        mgsm::NoiseModel model;
        model.base_feature = Vec(cfg.d_v);
        RngStream sub = rng.substream(stream);
        for (double& x : model.base_feature) x = sub.uniform(-1.0, 1.0);
        model.sigma_diag = Vec(cfg.d_v, 0.05);
        model.drift = Vec(cfg.d_v, 0.002);

        // EMA memory over the noisy stream, then attention over the memory
        // bank of the last 4 snapshots to produce the debiased feature.
        mgsm::MemoryState state{model.base_feature, lambda, 0, std::nullopt};
        mgsm::MemoryBank bank(4);
        MlpParams gate = make_mlp_params(cfg.d_v, a.seed ^ 0xa11ce);
        Matrix proj = irg::seeded_matrix(cfg.d_v, 2 * cfg.d_v, sub);
        Vec v_prev, v_t;
        for (std::size_t t = 0; t < a.steps; ++t) {
            v_t = gaussian_sample(sub, model.feature_at(t), model.sigma_diag);
            if (t == 0) v_prev = v_t;  // first frame: no previous feature
            state = mgsm::memory_update(state, v_t);
            bank.push(state.memory, v_t);
            v_prev = v_t;
        }
        Vec w = mgsm::adaptive_weights(gate, v_t);
        Vec v_star = mgsm::gated_concat(v_t, v_prev, w);
        e.visual = mgsm::enhance_bank(v_star, bank.keys(), bank.values(), proj);
        return e;
    };

    irg::EntityFeature subj = make_entity(0, "person", {120, 80, 260, 420}, 1);
    irg::EntityFeature obj = make_entity(1, "sofa", {200, 260, 520, 460}, 2);
    irg::RelationHeadParams params = irg::make_relation_head_params(cfg, vocab, a.seed);
    std::vector<irg::PredicateDistributions> rounds =
        irg::irg_rounds(subj, obj, params, a.rounds);

    ordered_json j;
    j["toolkit_version"] = kVersion;
    j["seed"] = a.seed;
    j["config"]["mode"] = a.mode;
    j["config"]["lambda"] = lambda;
    j["config"]["rounds"] = a.rounds;
    j["config"]["memory_steps"] = a.steps;
    j["entities"] = {{{"id", 0}, {"class", "person"}}, {{"id", 1}, {"class", "sofa"}}};
    j["rounds"] = ordered_json::array();
    for (std::size_t r = 0; r < rounds.size(); ++r) {
        ordered_json rj;
        rj["round"] = r;
        rj["attention"] = rounds[r].attention;
        rj["spatial"] = rounds[r].spatial;
        rj["contacting"] = rounds[r].contacting;
        auto top = [&](const Vec& p, std::size_t category) {
            std::size_t local = irg::argmax_lowest(p);
            return vocab.predicates()[static_cast<std::size_t>(
                params.global_predicate_id(category, local))];
        };
        rj["top"] = {{"attention", top(rounds[r].attention, 0)},
                     {"spatial", top(rounds[r].spatial, 1)},
                     {"contacting", top(rounds[r].contacting, 2)}};
        j["rounds"].push_back(std::move(rj));
    }
    emit(a.out, j.dump(2) + "\n");
    return 0;
}

}  // namespace

// --------------------------------------------------------------------------

int main(int argc, char** argv) {
    CLI::App app{"visa: unbiased scene-graph evaluation and memory-analysis toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads,
                   "worker pool cap (0 = available parallelism); output is identical "
                   "regardless of thread count");

    std::function<int()> action;

    // validate ------------------------------------------------------------
    auto va = std::make_shared<ValidateArgs>();
    CLI::App* validate = app.add_subcommand("validate", "check a scene-graph JSONL file");
    validate->add_option("--data", va->data, "scene-graph JSONL file")->required();
    validate->add_option("--vocab", va->vocab, "vocabulary JSON (default: built-in AG-style)");
    validate->add_option("--out", va->out, "report path or - for stdout");
    validate->callback([&, va] { action = [va] { return run_validate(*va); }; });

    // evaluate ------------------------------------------------------------
    auto ea = std::make_shared<EvaluateArgs>();
    CLI::App* evaluate = app.add_subcommand("evaluate", "R@K / mR@K with split reporting");
    evaluate->add_option("--gt", ea->gt, "ground-truth JSONL")->required();
    evaluate->add_option("--pred", ea->pred, "prediction JSONL")->required();
    evaluate->add_option("--mode", ea->mode, "predcls|sgcls|sgdet (default sgcls)")
        ->check(CLI::IsMember({"predcls", "sgcls", "sgdet"}));
    evaluate->add_option("--constraint", ea->constraint, "with|semi|no (default with)")
        ->check(CLI::IsMember({"with", "semi", "no"}));
    evaluate->add_option("--k", ea->ks, "K values (default 10,20,50)")->delimiter(',');
    evaluate->add_option("--iou", ea->iou, "SGDET IoU threshold (default 0.5)");
    evaluate->add_option("--semi-threshold", ea->semi_threshold,
                         "semi-constraint confidence threshold (default 0.9)");
    evaluate->add_option("--freq", ea->freq, "frequency table for HEAD/BODY/TAIL splits");
    evaluate->add_option("--vocab", ea->vocab, "vocabulary JSON");
    evaluate->add_option("--out", ea->out, "JSON report path or -");
    evaluate->add_option("--csv", ea->csv, "optional per-class CSV report path");
    evaluate->add_flag("--macro-per-frame", ea->macro_per_frame,
                       "average per-class recalls per frame instead of micro");
    evaluate->callback([&, ea] { action = [ea] { return run_evaluate(*ea); }; });

    // simulate-memory / sweep-lambda --------------------------------------
    auto add_memory_options = [](CLI::App* cmd, std::shared_ptr<MemoryArgs> ma,
                                 bool sweep) {
        std::map<std::string, CLI::Option*> opts;
        opts["lambda"] = sweep ? nullptr
                               : cmd->add_option("--lambda", ma->lambda,
                                                 "EMA rate (default 0.04 sgcls / 0.06 sgdet)");
        cmd->add_option("--mode", ma->mode, "task mode fixing the default lambda")
            ->check(CLI::IsMember({"predcls", "sgcls", "sgdet"}));
        cmd->add_option("--dim", ma->dim, "feature width (default 8)");
        opts["sigma"] = cmd->add_option("--sigma", ma->sigma,
                                        "noise variance, scalar or per-coordinate list")
                            ->delimiter(',');
        opts["delta"] = cmd->add_option("--delta", ma->delta,
                                        "drift per step, scalar or list")
                            ->delimiter(',');
        cmd->add_option("--base", ma->base, "base feature, scalar or list")->delimiter(',');
        opts["steps"] = cmd->add_option("--steps", ma->steps, "steps per trial");
        opts["trials"] = cmd->add_option("--trials", ma->trials, "Monte-Carlo trials");
        opts["seed"] = cmd->add_option("--seed", ma->seed, "master RNG seed");
        cmd->add_option("--format", ma->format, "csv|json (default csv)")
            ->check(CLI::IsMember({"csv", "json"}));
        cmd->add_option("--out", ma->out, "output path or -");
        cmd->add_option("--config", ma->config,
                        "JSON config file (keys: lambda, sigma, delta, steps, trials, seed); "
                        "explicit flags win");
        if (sweep) {
            cmd->add_option("--grid", ma->grid, "lambda grid (default Table-7 grid)")
                ->delimiter(',');
            cmd->add_flag("--no-empirical", ma->no_empirical,
                          "skip the Monte-Carlo columns");
        }
        return opts;
    };
    auto apply_memory_config = [](const MemoryArgs& args,
                                  const std::map<std::string, CLI::Option*>& opts,
                                  MemoryArgs& out) {
        if (args.config.empty()) return;
        json cfg = load_json_config(args.config);
        auto vec_key = [&](const char* key, const CLI::Option* opt, std::vector<double>& var) {
            if (opt != nullptr && opt->count() > 0) return;
            if (!cfg.contains(key)) return;
            const json& v = cfg.at(key);
            var = v.is_array() ? v.get<std::vector<double>>()
                               : std::vector<double>{v.get<double>()};
        };
        merge_config(cfg, "lambda", opts.at("lambda"), out.lambda);
        vec_key("sigma", opts.at("sigma"), out.sigma);
        vec_key("delta", opts.at("delta"), out.delta);
        merge_config(cfg, "steps", opts.at("steps"), out.steps);
        merge_config(cfg, "trials", opts.at("trials"), out.trials);
        merge_config(cfg, "seed", opts.at("seed"), out.seed);
    };

    auto sa = std::make_shared<MemoryArgs>();
    CLI::App* simulate = app.add_subcommand(
        "simulate-memory", "Monte-Carlo EMA memory trace (mean/variance/bias per step)");
    auto sim_opts = add_memory_options(simulate, sa, /*sweep=*/false);
    simulate->callback([&, sa, sim_opts] {
        action = [sa, sim_opts, &apply_memory_config] {
            apply_memory_config(*sa, sim_opts, *sa);
            return run_simulate_memory(*sa);
        };
    });

    auto wa = std::make_shared<MemoryArgs>();
    wa->dim = 1;
    wa->delta = {0.004};  // ||delta||^2 = 1.6e-5 with sigma 1: optimum at 0.04
    CLI::App* sweep = app.add_subcommand(
        "sweep-lambda", "bias^2 / variance / total error across a lambda grid");
    auto sweep_opts = add_memory_options(sweep, wa, /*sweep=*/true);
    sweep->callback([&, wa, sweep_opts] {
        action = [wa, sweep_opts, &apply_memory_config] {
            apply_memory_config(*wa, sweep_opts, *wa);
            return run_sweep_lambda(*wa);
        };
    });

    // infotheory -----------------------------------------------------------
    auto ia = std::make_shared<InfoArgs>();
    CLI::App* info = app.add_subcommand(
        "infotheory", "confusion matrix and entropy/KL report from predictions");
    info->add_option("--gt", ia->gt, "ground-truth JSONL")->required();
    info->add_option("--pred", ia->pred, "prediction JSONL")->required();
    info->add_option("--vocab", ia->vocab, "vocabulary JSON");
    info->add_option("--class-pair", ia->class_pair,
                     "subject,object class-id filter (e.g. 0,30)")
        ->delimiter(',');
    info->add_flag("--bits", ia->bits, "report in bits instead of nats");
    info->add_option("--out", ia->out, "JSON report path or -");
    info->add_option("--csv", ia->csv, "optional confusion-matrix CSV path");
    info->callback([&, ia] { action = [ia] { return run_infotheory(*ia); }; });

    // generate -------------------------------------------------------------
    auto ga = std::make_shared<GenerateArgs>();
    CLI::App* generate = app.add_subcommand(
        "generate", "synthetic long-tail GT/prediction pair with frequency table");
    generate->add_option("--out-gt", ga->out_gt, "GT JSONL path")->required();
    generate->add_option("--out-pred", ga->out_pred, "prediction JSONL path")->required();
    generate->add_option("--out-freq", ga->out_freq, "frequency table JSON path")->required();
    generate->add_option("--out-vocab", ga->out_vocab, "also write the vocabulary here");
    generate->add_option("--vocab", ga->vocab, "vocabulary JSON (default: built-in)");
    generate->add_option("--videos", ga->cfg.videos, "number of videos (default 4)");
    generate->add_option("--frames", ga->cfg.frames_per_video, "frames per video (default 25)");
    generate->add_option("--entities", ga->cfg.entities_per_frame,
                         "entities per frame (default 4)");
    generate->add_option("--zipf", ga->cfg.zipf_exponent, "Zipf exponent (default 1.0)");
    generate->add_option("--noise", ga->cfg.noise, "prediction corruption in [0,1] (default 0)");
    generate->add_option("--seed", ga->cfg.seed, "RNG seed (default 7)");
    generate->add_option("--out", ga->out, "summary JSON path or -");
    generate->callback([&, ga] { action = [ga] { return run_generate(*ga); }; });

    // pipeline-demo --------------------------------------------------------
    auto pa = std::make_shared<PipelineArgs>();
    CLI::App* demo = app.add_subcommand(
        "pipeline-demo", "memory-enhanced features through the iterative relation loop");
    demo->add_option("--seed", pa->seed, "RNG seed (default 7)");
    demo->add_option("--rounds", pa->rounds, "iteration rounds N (default 1)");
    demo->add_option("--mode", pa->mode, "task mode fixing the default lambda")
        ->check(CLI::IsMember({"predcls", "sgcls", "sgdet"}));
    demo->add_option("--lambda", pa->lambda, "EMA rate override");
    demo->add_option("--memory-steps", pa->steps, "memory warm-up steps (default 24)");
    demo->add_option("--out", pa->out, "JSON report path or -");
    demo->callback([&, pa] { action = [pa] { return run_pipeline_demo(*pa); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage errors are exit 2; --help is 0
    }

    try {
        return action ? action() : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
