// sdd: train / sample / threshold / eval / gen-data for sparse data diffusion.
//
// Exit codes: 0 success, 2 usage or format problem, 3 numerical failure.

#include "sdd/sdd.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr const char* kBuildId = "sdd 1.0.0";

using nlohmann::json;

std::string dir_of(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    return parent.empty() ? "." : parent.string();
}

std::string manifest_log_for(const std::string& artifact) {
    return (std::filesystem::path(dir_of(artifact)) / "sdd_manifests.jsonl").string();
}

std::optional<std::uint64_t> env_seed_override() {
    const char* s = std::getenv("SDD_SEED");
    if (!s || !*s) return std::nullopt;
    return std::strtoull(s, nullptr, 10);
}

std::vector<std::size_t> parse_hidden(const std::string& csv) {
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(static_cast<std::size_t>(std::stoull(tok)));
    return out;
}

json config_to_json(const sdd::TrainConfig& cfg) {
    json j;
    j["learning-rate"] = cfg.learning_rate;
    j["batch-size"] = cfg.batch_size;
    j["total-steps"] = cfg.total_steps;
    j["ema-decay"] = cfg.ema_decay;
    j["self-cond-prob"] = cfg.self_cond_prob;
    j["seed"] = cfg.seed;
    j["schedule-kind"] = sdd::to_string(cfg.schedule_kind);
    j["schedule-offset"] = cfg.schedule_offset;
    j["model-kind"] = cfg.model_kind == sdd::ModelKind::sdd_joint ? "sdd" : "dense";
    j["hidden"] = cfg.hidden;
    j["temb-dim"] = cfg.temb_dim;
    j["per-feature-scale"] = cfg.per_feature_scale;
    return j;
}

void config_from_json(const json& j, sdd::TrainConfig& cfg) {
    if (j.contains("learning-rate")) cfg.learning_rate = j.at("learning-rate").get<double>();
    if (j.contains("batch-size")) cfg.batch_size = j.at("batch-size").get<std::size_t>();
    if (j.contains("total-steps")) cfg.total_steps = j.at("total-steps").get<std::size_t>();
    if (j.contains("ema-decay")) cfg.ema_decay = j.at("ema-decay").get<double>();
    if (j.contains("self-cond-prob")) cfg.self_cond_prob = j.at("self-cond-prob").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("schedule-kind"))
        cfg.schedule_kind = sdd::schedule_kind_from_string(j.at("schedule-kind").get<std::string>());
    if (j.contains("schedule-offset")) cfg.schedule_offset = j.at("schedule-offset").get<double>();
    if (j.contains("model-kind")) {
        const auto kind = j.at("model-kind").get<std::string>();
        if (kind == "sdd")
            cfg.model_kind = sdd::ModelKind::sdd_joint;
        else if (kind == "dense")
            cfg.model_kind = sdd::ModelKind::dense_baseline;
        else
            throw sdd::DomainError("config: unknown model-kind: " + kind);
    }
    if (j.contains("hidden")) cfg.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    if (j.contains("temb-dim")) cfg.temb_dim = j.at("temb-dim").get<std::size_t>();
    if (j.contains("per-feature-scale")) cfg.per_feature_scale = j.at("per-feature-scale").get<bool>();
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
    std::string kind = "clustered";
    std::size_t d = 256;
    double sparsity = 0.9;
    std::size_t clusters = 3;
    double intensity_mu = 0.0;
    double intensity_sigma = 0.5;
    std::size_t n = 10000;
    std::uint64_t seed = 0;
    std::string out;
    std::string csv;
};

int run_gen_data(const GenDataArgs& a) {
    sdd::SyntheticSpec spec;
    spec.kind = a.kind == "mixture" ? sdd::SyntheticKind::sparse_mixture
                                    : sdd::SyntheticKind::clustered_deposits;
    spec.d = a.d;
    spec.target_sparsity = a.sparsity;
    spec.clusters = a.clusters;
    spec.intensity_mu = a.intensity_mu;
    spec.intensity_sigma = a.intensity_sigma;
    spec.seed = env_seed_override().value_or(a.seed);

    sdd::Rng rng(spec.seed);
    const sdd::DataBatch batch = gen_synthetic(spec, a.n, rng);
    sdd::write_sddmat(a.out, batch.values);
    if (!a.csv.empty()) sdd::write_csv(a.csv, batch.values);

    sdd::RunManifest m;
    m.command = "gen-data";
    m.config = {{"kind", a.kind},       {"d", a.d},
                {"sparsity", a.sparsity}, {"clusters", a.clusters},
                {"n", a.n},             {"intensity-mu", a.intensity_mu},
                {"intensity-sigma", a.intensity_sigma}};
    m.seed = spec.seed;
    m.build_id = kBuildId;
    m.artifacts = {a.out};
    if (!a.csv.empty()) m.artifacts.push_back(a.csv);
    append_manifest(manifest_log_for(a.out), m);

    std::printf("generated n=%zu d=%zu mean_sparsity=%.17g\n", batch.n(), batch.d(),
                sdd::mean_sparsity(batch));
    return 0;
}

struct TrainArgs {
    std::string config_path;
    std::string data;
    std::string out;
    std::string log;
};

int run_train(const TrainArgs& a, const sdd::TrainConfig& cfg_cli, const CLI::App* cmd) {
    sdd::TrainConfig cfg;
    if (!a.config_path.empty()) {
        std::ifstream in(a.config_path);
        if (!in) throw sdd::FormatError("cannot open config: " + a.config_path);
        json j;
        in >> j;
        config_from_json(j, cfg);
    }
    // CLI overrides win over file values.
    const auto took = [cmd](const char* flag) { return cmd->count(flag) > 0; };
    if (took("--lr")) cfg.learning_rate = cfg_cli.learning_rate;
    if (took("--batch")) cfg.batch_size = cfg_cli.batch_size;
    if (took("--steps")) cfg.total_steps = cfg_cli.total_steps;
    if (took("--ema-decay")) cfg.ema_decay = cfg_cli.ema_decay;
    if (took("--self-cond-prob")) cfg.self_cond_prob = cfg_cli.self_cond_prob;
    if (took("--seed")) cfg.seed = cfg_cli.seed;
    if (took("--schedule")) cfg.schedule_kind = cfg_cli.schedule_kind;
    if (took("--schedule-offset")) cfg.schedule_offset = cfg_cli.schedule_offset;
    if (took("--model")) cfg.model_kind = cfg_cli.model_kind;
    if (took("--hidden")) cfg.hidden = cfg_cli.hidden;
    if (took("--temb-dim")) cfg.temb_dim = cfg_cli.temb_dim;
    if (took("--per-feature-scale")) cfg.per_feature_scale = cfg_cli.per_feature_scale;
    if (const auto s = env_seed_override()) cfg.seed = *s;
    cfg.validate();

    // Inputs before outputs: a missing dataset must not leave artifacts.
    const sdd::DatasetHandle ds = sdd::load_dataset(a.data);
    const sdd::ScaleSpec scale =
        cfg.per_feature_scale ? sdd::ScaleSpec::fit(ds.batch(), true) : ds.scale;

    const sdd::TrainResult res = train(ds.batch(), scale, cfg);

    sdd::Checkpoint ckpt;
    ckpt.model = res.model;
    ckpt.ema = res.ema;
    ckpt.kind = cfg.model_kind;
    ckpt.scale = scale;
    ckpt.schedule = sdd::NoiseSchedule(cfg.schedule_kind, cfg.schedule_offset);
    write_checkpoint(a.out, ckpt);

    const std::string log_path = a.log.empty() ? a.out + ".loss.csv" : a.log;
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw sdd::FormatError("cannot open loss log: " + log_path);
    write_loss_log(log, res.log);
    log.close();

    sdd::RunManifest m;
    m.command = "train";
    m.config = config_to_json(cfg);
    m.seed = cfg.seed;
    m.build_id = kBuildId;
    m.dataset_path = a.data;
    m.dataset_fingerprint = sdd::fnv1a64_file(a.data);
    m.artifacts = {a.out, log_path};
    append_manifest(manifest_log_for(a.out), m);

    std::printf("trained steps=%zu final_total=%.17g checkpoint=%s\n", res.log.size(),
                res.log.back().total, a.out.c_str());
    return 0;
}

struct SampleArgs {
    std::string ckpt;
    std::string kind = "ddim";
    std::size_t steps = 1000;
    std::size_t n = 1;
    std::uint64_t seed = 0;
    double eta = 1.0;
    bool no_ema = false;
    std::string out;
    std::string csv;
    std::string logits;
};

int run_sample(const SampleArgs& a) {
    const sdd::Checkpoint ckpt = sdd::read_checkpoint(a.ckpt);
    sdd::SampleConfig cfg;
    cfg.kind = sdd::sampler_kind_from_string(a.kind);
    cfg.steps = a.steps;
    cfg.batch = a.n;
    cfg.seed = env_seed_override().value_or(a.seed);
    cfg.use_ema = !a.no_ema;
    cfg.ddpm_eta = a.eta;

    const sdd::SampleResult res = sample_checkpoint(ckpt, cfg);
    sdd::write_sddmat(a.out, res.data.values);
    if (!a.csv.empty()) sdd::write_csv(a.csv, res.data.values);
    if (!a.logits.empty()) {
        if (ckpt.kind != sdd::ModelKind::sdd_joint)
            throw sdd::DomainError("--logits requires a joint (sdd) checkpoint");
        const std::size_t d = res.data.d();
        sdd::write_sddmat(a.logits, res.final_prediction.slice_cols(d, 2 * d));
    }

    sdd::RunManifest m;
    m.command = "sample";
    m.config = {{"kind", a.kind}, {"steps", a.steps}, {"n", a.n},
                {"eta", a.eta},   {"use-ema", !a.no_ema}};
    m.seed = cfg.seed;
    m.build_id = kBuildId;
    m.dataset_path = a.ckpt;
    m.dataset_fingerprint = sdd::fnv1a64_file(a.ckpt);
    m.artifacts = {a.out};
    if (!a.csv.empty()) m.artifacts.push_back(a.csv);
    if (!a.logits.empty()) m.artifacts.push_back(a.logits);
    append_manifest(manifest_log_for(a.out), m);

    std::printf("sampled n=%zu d=%zu mean_sparsity=%.17g\n", res.data.n(), res.data.d(),
                sdd::mean_sparsity(res.data));
    return 0;
}

struct ThresholdArgs {
    std::string in;
    double target = -1.0;
    std::string match;
    std::size_t grid = 1000;
    double tolerance = 0.02;
    std::string out;
    std::string report;
};

int run_threshold(const ThresholdArgs& a) {
    const sdd::Matrix samples = sdd::read_sddmat(a.in);
    double target = a.target;
    if (!a.match.empty()) {
        const sdd::DatasetHandle ds = sdd::load_dataset(a.match);
        target = sdd::mean_sparsity(ds.batch());
    }
    if (target < 0.0)
        throw sdd::DomainError("threshold: need --target-sparsity or --match");

    const auto [batch, res] =
        sdd::threshold_to_sparsity(sdd::DataBatch{samples}, target, a.grid, a.tolerance);
    sdd::write_sddmat(a.out, batch.values);

    json rj;
    rj["threshold"] = res.threshold;
    rj["target_sparsity"] = res.target_sparsity;
    rj["achieved_sparsity"] = res.achieved_sparsity;
    rj["achieved_prev"] = res.achieved_prev;
    rj["grid_index"] = res.grid_index;
    rj["grid_size"] = res.grid_size;
    rj["converged"] = res.converged;
    rj["tolerance"] = res.tolerance;
    const std::string report_path = a.report.empty() ? a.out + ".json" : a.report;
    std::ofstream rep(report_path, std::ios::trunc);
    if (!rep) throw sdd::FormatError("cannot open report: " + report_path);
    rep << rj.dump(2) << '\n';
    rep.close();

    sdd::RunManifest m;
    m.command = "threshold";
    m.config = {{"target", target}, {"grid", a.grid}, {"tolerance", a.tolerance}};
    m.build_id = kBuildId;
    m.dataset_path = a.in;
    m.dataset_fingerprint = sdd::fnv1a64_file(a.in);
    m.artifacts = {a.out, report_path};
    append_manifest(manifest_log_for(a.out), m);

    std::printf("threshold=%.17g achieved=%.17g target=%.17g converged=%d\n", res.threshold,
                res.achieved_sparsity, res.target_sparsity, res.converged ? 1 : 0);
    return 0;
}

struct EvalArgs {
    std::string real;
    std::string gen;
    std::string metrics = "w1,mmd,scc,pcc,lisi";
    std::string out;
    std::string csv_prefix;
    std::size_t lisi_k = 30;
    double mmd_bandwidth = 0.0;
};

int run_eval(const EvalArgs& a) {
    const sdd::DatasetHandle real = sdd::load_dataset(a.real);
    const sdd::DatasetHandle gen = sdd::load_dataset(a.gen);

    sdd::MetricsOptions opt;
    opt.w1 = a.metrics.find("w1") != std::string::npos;
    opt.mmd = a.metrics.find("mmd") != std::string::npos;
    opt.corr = a.metrics.find("scc") != std::string::npos ||
               a.metrics.find("pcc") != std::string::npos;
    opt.lisi = a.metrics.find("lisi") != std::string::npos;
    opt.lisi_k = a.lisi_k;
    opt.mmd_bandwidth = a.mmd_bandwidth;

    const sdd::MetricsReport report = compute_report(real.batch(), gen.batch(), opt);

    std::ofstream out(a.out, std::ios::trunc);
    if (!out) throw sdd::FormatError("cannot open report: " + a.out);
    out << report_to_json(report).dump(2) << '\n';
    out.close();

    if (!a.csv_prefix.empty()) {
        sdd::write_report_csv(a.csv_prefix + "_metrics.csv", report);
        sdd::write_histogram_csv(a.csv_prefix + "_sparsity_real.csv", report.sparsity_real.counts,
                                 0.0, 1.0);
        sdd::write_histogram_csv(a.csv_prefix + "_sparsity_gen.csv", report.sparsity_gen.counts,
                                 0.0, 1.0);
    }

    sdd::RunManifest m;
    m.command = "eval";
    m.config = {{"metrics", a.metrics}, {"lisi-k", a.lisi_k}, {"mmd-bandwidth", a.mmd_bandwidth}};
    m.build_id = kBuildId;
    m.dataset_path = a.real;
    m.dataset_fingerprint = sdd::fnv1a64_file(a.real);
    m.artifacts = {a.out};
    append_manifest(manifest_log_for(a.out), m);

    std::printf("eval written to %s\n", a.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse data diffusion: joint dense+sparsity-bit generation"};
    app.require_subcommand(1);

    GenDataArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic sparse dataset");
    gen->add_option("--kind", gen_args.kind)->check(CLI::IsMember({"clustered", "mixture"}));
    gen->add_option("--d", gen_args.d);
    gen->add_option("--sparsity", gen_args.sparsity);
    gen->add_option("--clusters", gen_args.clusters);
    gen->add_option("--intensity-mu", gen_args.intensity_mu);
    gen->add_option("--intensity-sigma", gen_args.intensity_sigma);
    gen->add_option("--n", gen_args.n);
    gen->add_option("--seed", gen_args.seed);
    gen->add_option("--out", gen_args.out)->required();
    gen->add_option("--csv", gen_args.csv);

    TrainArgs train_args;
    sdd::TrainConfig cli_cfg;
    std::string hidden_csv, schedule_str, model_str;
    CLI::App* tr = app.add_subcommand("train", "train a model, write a checkpoint");
    tr->add_option("--config", train_args.config_path);
    tr->add_option("--data", train_args.data)->required();
    tr->add_option("--out", train_args.out)->required();
    tr->add_option("--log", train_args.log);
    tr->add_option("--lr", cli_cfg.learning_rate);
    tr->add_option("--batch", cli_cfg.batch_size);
    tr->add_option("--steps", cli_cfg.total_steps);
    tr->add_option("--ema-decay", cli_cfg.ema_decay);
    tr->add_option("--self-cond-prob", cli_cfg.self_cond_prob);
    tr->add_option("--seed", cli_cfg.seed);
    tr->add_option("--schedule", schedule_str)->check(CLI::IsMember({"cosine", "linear"}));
    tr->add_option("--schedule-offset", cli_cfg.schedule_offset);
    tr->add_option("--model", model_str)->check(CLI::IsMember({"sdd", "dense"}));
    tr->add_option("--hidden", hidden_csv);
    tr->add_option("--temb-dim", cli_cfg.temb_dim);
    tr->add_flag("--per-feature-scale", cli_cfg.per_feature_scale);

    SampleArgs sample_args;
    CLI::App* sa = app.add_subcommand("sample", "sample from a checkpoint");
    sa->add_option("--ckpt", sample_args.ckpt)->required();
    sa->add_option("--kind", sample_args.kind)->check(CLI::IsMember({"ddpm", "ddim"}));
    sa->add_option("--steps", sample_args.steps);
    sa->add_option("--n", sample_args.n);
    sa->add_option("--seed", sample_args.seed);
    sa->add_option("--eta", sample_args.eta);
    sa->add_flag("--no-ema", sample_args.no_ema);
    sa->add_option("--out", sample_args.out)->required();
    sa->add_option("--csv", sample_args.csv);
    sa->add_option("--logits", sample_args.logits);

    ThresholdArgs th_args;
    CLI::App* th = app.add_subcommand("threshold", "post-hoc sparsification baseline");
    th->add_option("--in", th_args.in)->required();
    th->add_option("--target-sparsity", th_args.target);
    th->add_option("--match", th_args.match);
    th->add_option("--grid", th_args.grid);
    th->add_option("--tolerance", th_args.tolerance);
    th->add_option("--out", th_args.out)->required();
    th->add_option("--report", th_args.report);

    EvalArgs eval_args;
    CLI::App* ev = app.add_subcommand("eval", "compare real vs generated samples");
    ev->add_option("--real", eval_args.real)->required();
    ev->add_option("--gen", eval_args.gen)->required();
    ev->add_option("--metrics", eval_args.metrics);
    ev->add_option("--out", eval_args.out)->required();
    ev->add_option("--csv-prefix", eval_args.csv_prefix);
    ev->add_option("--lisi-k", eval_args.lisi_k);
    ev->add_option("--mmd-bandwidth", eval_args.mmd_bandwidth);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return run_gen_data(gen_args);
        if (tr->parsed()) {
            if (!schedule_str.empty())
                cli_cfg.schedule_kind = sdd::schedule_kind_from_string(schedule_str);
            if (!model_str.empty())
                cli_cfg.model_kind = model_str == "dense" ? sdd::ModelKind::dense_baseline
                                                          : sdd::ModelKind::sdd_joint;
            if (!hidden_csv.empty()) cli_cfg.hidden = parse_hidden(hidden_csv);
            return run_train(train_args, cli_cfg, tr);
        }
        if (sa->parsed()) return run_sample(sample_args);
        if (th->parsed()) return run_threshold(th_args);
        if (ev->parsed()) return run_eval(eval_args);
    } catch (const sdd::DivergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "error: config parse: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
