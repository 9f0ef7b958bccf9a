#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "trajalign/commands.hpp"
#include "trajalign/config.hpp"

using namespace trajalign;

int main(int argc, char** argv) {
    CLI::App app{"trajalign: align predicted tool-call trajectories to references and score them"};
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    std::optional<double> tau_weak, tau_strong, lambda_pen;
    std::optional<std::string> encoder, weights, policy_path;
    std::optional<std::size_t> jobs;
    bool strict = false;
    std::string format = "json";
    std::optional<std::string> out;

    app.add_option("--config", config_path, "config file (overrides $TRAJALIGN_CONFIG)");
    app.add_option("--tau-weak", tau_weak, "screening threshold (default 0.6)");
    app.add_option("--tau-strong", tau_strong, "argument-similarity threshold (default 0.8)");
    app.add_option("--lambda-pen", lambda_pen, "cost of sub-threshold cells (default 1000)");
    app.add_option("--encoder", encoder, "builtin | builtin:<dim> | exec:<cmd> | http:<url>");
    app.add_option("--policy", policy_path, "serialization policy JSON file");
    app.add_option("--weights", weights, "8 comma-separated metric weights summing to 1");
    app.add_option("--jobs", jobs, "parallel sample pairs in batch mode");
    app.add_flag("--strict", strict, "fail on unpaired files");
    app.add_option("--format", format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--out", out, "output path (stdout when omitted)");

    ScoreOptions score;
    auto* score_cmd = app.add_subcommand("score", "score one predicted trajectory against its reference");
    score_cmd->add_option("pred", score.pred, "predicted trajectory")->required();
    score_cmd->add_option("ref", score.ref, "reference trajectory")->required();

    BatchOptions batch;
    std::optional<std::string> csv_out, task_responses, grounding_responses;
    auto* batch_cmd = app.add_subcommand("batch", "score every filename-matched pair of two directories");
    batch_cmd->add_option("pred_dir", batch.pred_dir, "predicted trajectories")->required();
    batch_cmd->add_option("ref_dir", batch.ref_dir, "reference trajectories")->required();
    batch_cmd->add_option("--csv-out", csv_out, "also write the leaderboard CSV here");
    batch_cmd->add_option("--model", batch.model, "leaderboard row label");
    batch_cmd->add_option("--task-responses", task_responses, "task completion judge file");
    batch_cmd->add_option("--grounding-responses", grounding_responses, "information grounding judge file");

    ClassifyOptions classify;
    auto* classify_cmd = app.add_subcommand("classify-calls", "outcome distribution of a replayed call log");
    classify_cmd->add_option("--log", classify.log, "call log (JSON lines)")->required();
    classify_cmd->add_option("--registry", classify.registry, "tool registry (JSON list)")->required();

    JudgeOptions judge;
    std::string mode = "task";
    std::optional<std::string> scale;
    auto* judge_cmd = app.add_subcommand("judge-aggregate", "trimmed-mean aggregate of judge responses");
    judge_cmd->add_option("responses", judge.responses, "judge responses file")->required();
    judge_cmd->add_option("--mode", mode, "task | grounding")->check(CLI::IsMember({"task", "grounding"}));
    judge_cmd->add_option("--scale", scale, "ten_to_unit | unit")->check(CLI::IsMember({"ten_to_unit", "unit"}));

    RenderOptions render;
    std::optional<std::string> context_file;
    std::vector<std::string> sets;
    auto* render_cmd = app.add_subcommand("render-prompt", "print a judge or pipeline prompt");
    render_cmd->add_option("template", render.template_name, "template name")->required();
    render_cmd->add_option("--context", context_file, "JSON object of placeholder values");
    render_cmd->add_option("--set", sets, "placeholder value as key=value");

    for (auto* sub : {score_cmd, batch_cmd, classify_cmd, judge_cmd, render_cmd}) {
        sub->fallthrough();
    }

    CLI11_PARSE(app, argc, argv);

    RunConfig cfg;
    try {
        cfg = config_path ? load_run_config_file(*config_path) : load_run_config();
        if (tau_weak) cfg.alignment.tau_weak = *tau_weak;
        if (tau_strong) cfg.alignment.tau_strong = *tau_strong;
        if (lambda_pen) cfg.alignment.lambda_pen = *lambda_pen;
        if (encoder) cfg.encoder = *encoder;
        if (policy_path) cfg = apply_config(cfg, {{"policy_path", *policy_path}});
        if (weights) cfg.weights = parse_weights(*weights);
        if (jobs) cfg.jobs = *jobs;
        if (strict) cfg.strict = true;
        cfg.validate();
    } catch (const Error& e) {
        std::cerr << error_record(e).dump() << "\n";
        return 1;
    }

    const OutputFormat fmt = parse_format(format);
    std::optional<std::filesystem::path> out_path;
    if (out) {
        out_path = *out;
    }

    if (*score_cmd) {
        score.out = out_path;
        score.format = fmt;
        return cmd_score(score, cfg, std::cout, std::cerr);
    }
    if (*batch_cmd) {
        batch.out = out_path;
        batch.format = fmt;
        if (csv_out) batch.csv_out = *csv_out;
        if (task_responses) batch.task_responses = *task_responses;
        if (grounding_responses) batch.grounding_responses = *grounding_responses;
        return cmd_batch(batch, cfg, std::cout, std::cerr);
    }
    if (*classify_cmd) {
        classify.out = out_path;
        return cmd_classify_calls(classify, std::cout, std::cerr);
    }
    if (*judge_cmd) {
        judge.out = out_path;
        judge.mode = parse_judge_mode(mode);
        if (scale) judge.scale = *scale == "unit" ? ScoreScale::Unit : ScoreScale::TenToUnit;
        return cmd_judge_aggregate(judge, cfg, std::cout, std::cerr);
    }
    render.out = out_path;
    if (context_file) render.context_file = *context_file;
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::cerr << error_record(ConfigError("--set expects key=value, got '" + kv + "'")).dump() << "\n";
            return 1;
        }
        render.context[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return cmd_render_prompt(render, std::cout, std::cerr);
}
