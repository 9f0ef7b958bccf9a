#include "trajalign/commands.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include "trajalign/outcome.hpp"
#include "trajalign/report.hpp"
#include "trajalign/trajectory.hpp"

namespace fs = std::filesystem;

namespace trajalign {

namespace {

template <typename F>
auto in_file(const fs::path& path, F&& f) {
    try {
        return f();
    } catch (const FileError&) {
        throw;
    } catch (const Error& e) {
        throw FileError(e, path.string());
    }
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw FileError(IoError("cannot open " + path.string()), path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FileError(SchemaError(e.what()), path.string());
    }
}

void emit(const std::string& text, const std::optional<fs::path>& path, std::ostream& out) {
    if (!path) {
        out << text;
        return;
    }
    std::ofstream f(*path, std::ios::binary);
    if (!f || !(f << text) || !f.flush()) {
        throw FileError(IoError("cannot write " + path->string()), path->string());
    }
}

template <typename F>
int guarded(std::ostream& err, F&& f) {
    try {
        f();
        return 0;
    } catch (const Error& e) {
        err << error_record(e).dump() << "\n";
    } catch (const std::exception& e) {
        err << error_record(Error("InternalError", e.what())).dump() << "\n";
    }
    return 1;
}

std::vector<std::string> json_files_under(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw FileError(IoError("not a directory: " + dir.string()), dir.string());
    }
    std::vector<std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            out.push_back(fs::relative(entry.path(), dir).generic_string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string sample_id_of(const std::string& rel) {
    return rel.substr(0, rel.size() - std::string(".json").size());
}

ScoreScale default_scale(JudgeMode mode) {
    return mode == JudgeMode::Task ? ScoreScale::TenToUnit : ScoreScale::Unit;
}

std::string require_string(const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key) || !obj[key].is_string()) {
        throw SchemaError(where + ": needs a string \"" + key + "\"");
    }
    return obj[key].get<std::string>();
}

std::vector<std::string> attachments_of(const nlohmann::json& inst) {
    std::vector<std::string> out;
    if (inst.contains("attachments")) {
        for (const auto& a : inst["attachments"]) {
            out.push_back(a.is_string() ? a.get<std::string>() : a.dump());
        }
    }
    return out;
}

InstanceJudgement task_instance(const nlohmann::json& inst,
                                const std::string& id,
                                const std::string& where,
                                ScoreScale scale,
                                const std::vector<JudgeEndpoint>& pool) {
    if (inst.contains("prompt")) {
        if (pool.empty()) {
            throw ConfigError(where + ": instance carries a prompt but no judges are configured");
        }
        return JudgeEnsemble(pool).judge(id, require_string(inst, "prompt", where), attachments_of(inst), scale);
    }
    if (!inst.contains("responses") || !inst["responses"].is_array()) {
        throw SchemaError(where + ": needs \"responses\" or \"prompt\"");
    }
    InstanceJudgement out;
    out.instance_id = id;
    for (const auto& r : inst["responses"]) {
        const std::string judge = r.is_object() && r.contains("judge_id") && r["judge_id"].is_string()
                                      ? r["judge_id"].get<std::string>()
                                      : "?";
        if (r.is_object() && r.contains("error")) {
            out.failures.push_back(judge + ": " + (r["error"].is_string() ? r["error"].get<std::string>()
                                                                          : r["error"].dump()));
            continue;
        }
        if (!r.is_object() || !r.contains("text") || !r["text"].is_string()) {
            out.failures.push_back(judge + ": response without text");
            continue;
        }
        try {
            std::string text = r["text"].get<std::string>();
            const double score = parse_boxed_score(text, scale);
            out.verdicts.push_back({judge, std::move(text), score, scale});
        } catch (const Error& e) {
            out.failures.push_back(judge + ": " + e.kind() + ": " + e.what());
        }
    }
    return out;
}

std::pair<std::size_t, std::size_t> step_key(const nlohmann::json& s, const std::string& where) {
    if (!s.is_object() || !s.contains("gt_step") || !s.contains("pred_step") ||
        !s["gt_step"].is_number_unsigned() || !s["pred_step"].is_number_unsigned()) {
        throw SchemaError(where + ": needs non-negative integer gt_step and pred_step");
    }
    return {s["gt_step"].get<std::size_t>(), s["pred_step"].get<std::size_t>()};
}

GroundingInstance grounding_instance(const nlohmann::json& inst,
                                     const std::string& id,
                                     const std::string& where,
                                     ScoreScale scale,
                                     const std::vector<JudgeEndpoint>& pool) {
    GroundingInstance out;
    out.instance_id = id;
    if (inst.contains("step_pairs")) {
        if (pool.empty()) {
            throw ConfigError(where + ": instance carries prompts but no judges are configured");
        }
        JudgeEnsemble ensemble(pool);
        std::map<std::string, StepScoreTable> tables;
        for (const auto& e : pool) {
            tables[e.judge_id].judge_id = e.judge_id;
        }
        for (const auto& sp : inst["step_pairs"]) {
            const auto key = step_key(sp, where);
            auto j = ensemble.judge(id, require_string(sp, "prompt", where), attachments_of(sp), scale);
            for (auto& f : j.failures) {
                out.failures.push_back(std::move(f));
            }
            for (const auto& v : j.verdicts) {
                tables[v.judge_id].scores[key] = v.score;
            }
        }
        for (const auto& e : pool) {
            out.tables.push_back(std::move(tables[e.judge_id]));
        }
        return out;
    }
    if (!inst.contains("tables") || !inst["tables"].is_array()) {
        throw SchemaError(where + ": needs \"tables\" or \"step_pairs\"");
    }
    for (const auto& t : inst["tables"]) {
        const std::string judge = t.is_object() && t.contains("judge_id") && t["judge_id"].is_string()
                                      ? t["judge_id"].get<std::string>()
                                      : "?";
        if (t.is_object() && t.contains("error")) {
            out.failures.push_back(judge + ": " + (t["error"].is_string() ? t["error"].get<std::string>()
                                                                          : t["error"].dump()));
            continue;
        }
        try {
            if (!t.is_object() || !t.contains("scores") || !t["scores"].is_array()) {
                throw SchemaError("table without a \"scores\" list");
            }
            StepScoreTable table{judge, {}};
            for (const auto& s : t["scores"]) {
                const auto key = step_key(s, "score entry");
                double v = 0.0;
                if (s.contains("score") && s["score"].is_number()) {
                    v = s["score"].get<double>();
                    if (!(v >= 0.0 && v <= 1.0)) {
                        throw DomainError("score " + std::to_string(v) + " outside [0,1]");
                    }
                } else if (s.contains("text") && s["text"].is_string()) {
                    v = parse_boxed_score(s["text"].get<std::string>(), scale);
                } else {
                    throw SchemaError("score entry needs \"score\" or \"text\"");
                }
                if (!table.scores.emplace(key, v).second) {
                    throw ShapeError("step pair (" + std::to_string(key.first) + "," +
                                     std::to_string(key.second) + ") scored twice");
                }
            }
            out.tables.push_back(std::move(table));
        } catch (const Error& e) {
            out.failures.push_back(judge + ": " + e.kind() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace

nlohmann::json error_record(const Error& e) {
    nlohmann::json rec = {{"kind", e.kind()}, {"message", e.what()}, {"file", nullptr}};
    if (const auto* fe = dynamic_cast<const FileError*>(&e)) {
        rec["file"] = fe->file();
    }
    return {{"error", rec}};
}

OutputFormat parse_format(const std::string& s) {
    if (s == "json") {
        return OutputFormat::Json;
    }
    if (s == "csv") {
        return OutputFormat::Csv;
    }
    throw ConfigError("unknown format '" + s + "' (expected json|csv)");
}

JudgeMode parse_judge_mode(const std::string& s) {
    if (s == "task") {
        return JudgeMode::Task;
    }
    if (s == "grounding") {
        return JudgeMode::Grounding;
    }
    throw ConfigError("unknown judge mode '" + s + "' (expected task|grounding)");
}

Pairing pair_files(const fs::path& pred_dir, const fs::path& ref_dir, bool strict) {
    const auto preds = json_files_under(pred_dir);
    const auto refs = json_files_under(ref_dir);
    const std::set<std::string> pred_set(preds.begin(), preds.end());
    const std::set<std::string> ref_set(refs.begin(), refs.end());
    Pairing out;
    for (const auto& rel : preds) {
        if (ref_set.count(rel)) {
            out.pairs.push_back({sample_id_of(rel), pred_dir / rel, ref_dir / rel});
        } else {
            out.warnings.push_back("unpaired prediction " + (pred_dir / rel).generic_string());
        }
    }
    for (const auto& rel : refs) {
        if (!pred_set.count(rel)) {
            out.warnings.push_back("unpaired reference " + (ref_dir / rel).generic_string());
        }
    }
    if (strict && !out.warnings.empty()) {
        throw PairingError(out.warnings.front() + (out.warnings.size() > 1
                                                        ? " (and " + std::to_string(out.warnings.size() - 1) + " more)"
                                                        : ""));
    }
    if (out.pairs.empty()) {
        throw EmptyCorpusError("no paired files under " + pred_dir.string() + " and " + ref_dir.string());
    }
    return out;
}

BatchResult run_batch(const BatchOptions& opts, const RunConfig& cfg) {
    cfg.validate();
    Pairing pairing = pair_files(opts.pred_dir, opts.ref_dir, cfg.strict);
    auto encoder = make_encoder(cfg.encoder);

    const std::size_t n = pairing.pairs.size();
    std::vector<std::optional<SampleReport>> reports(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            const auto& p = pairing.pairs[i];
            try {
                const Trajectory ref = in_file(p.ref, [&] { return load_trajectory(p.ref); });
                const Trajectory pred = in_file(p.pred, [&] { return load_trajectory(p.pred); });
                reports[i] = in_file(p.pred, [&] {
                    return score_sample(ref, pred, cfg.alignment, *encoder, cfg.policy, p.sample_id);
                });
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min(cfg.jobs, n);
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    BatchResult out;
    out.encoder_identity = encoder->identity();
    out.warnings = std::move(pairing.warnings);
    JudgeSummary judges;
    if (opts.task_responses) {
        out.task = judge_responses_file(*opts.task_responses, JudgeMode::Task, cfg);
        judges.task_comp = out.task->value;
        judges.judge_failures += out.task->judge_failures;
    }
    if (opts.grounding_responses) {
        out.grounding = judge_responses_file(*opts.grounding_responses, JudgeMode::Grounding, cfg);
        judges.info_grnd = out.grounding->value;
        judges.judge_failures += out.grounding->judge_failures;
    }
    std::vector<SampleReport> samples;
    samples.reserve(n);
    for (auto& r : reports) {
        samples.push_back(std::move(*r));
    }
    out.corpus = aggregate(std::move(samples), judges, cfg.weights);
    return out;
}

std::vector<JudgeEndpoint> make_judge_pool(const RunConfig& cfg) {
    std::vector<JudgeEndpoint> pool;
    std::map<std::string, std::shared_ptr<MockJudge>> mocks;
    for (const auto& j : cfg.judges) {
        if (j.url.rfind("mock:", 0) == 0) {
            const std::string fixture = j.url.substr(5);
            auto& mock = mocks[fixture];
            if (!mock) {
                mock = in_file(fixture, [&] { return std::make_shared<MockJudge>(read_json(fixture)); });
            }
            pool.push_back({j.id, mock});
        } else if (j.url.rfind("http://", 0) == 0 || j.url.rfind("https://", 0) == 0) {
            pool.push_back({j.id, std::make_shared<HttpJudge>(j.url)});
        } else {
            throw ConfigError("judge '" + j.id + "': unsupported url '" + j.url + "' (expected http(s)://... or mock:<file>)");
        }
    }
    return pool;
}

JudgedMetric judge_responses(const nlohmann::json& doc,
                             JudgeMode mode,
                             const RunConfig& cfg,
                             std::optional<ScoreScale> scale) {
    if (!doc.is_object() || !doc.contains("instances") || !doc["instances"].is_array()) {
        throw SchemaError("judge responses need an \"instances\" list");
    }
    const ScoreScale sc = scale.value_or(default_scale(mode));
    const auto pool = make_judge_pool(cfg);
    std::vector<InstanceJudgement> task;
    std::vector<GroundingInstance> grounding;
    std::size_t i = 0;
    for (const auto& inst : doc["instances"]) {
        const std::string where = "/instances/" + std::to_string(i++);
        const std::string id = require_string(inst, "instance", where);
        if (mode == JudgeMode::Task) {
            task.push_back(task_instance(inst, id, where, sc, pool));
        } else {
            grounding.push_back(grounding_instance(inst, id, where, sc, pool));
        }
    }
    return mode == JudgeMode::Task ? task_completion_corpus(task) : information_grounding_corpus(grounding);
}

JudgedMetric judge_responses_file(const fs::path& path,
                                  JudgeMode mode,
                                  const RunConfig& cfg,
                                  std::optional<ScoreScale> scale) {
    const auto doc = read_json(path);
    return in_file(path, [&] { return judge_responses(doc, mode, cfg, scale); });
}

int cmd_score(const ScoreOptions& opts, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        cfg.validate();
        const Trajectory ref = in_file(opts.ref, [&] { return load_trajectory(opts.ref); });
        const Trajectory pred = in_file(opts.pred, [&] { return load_trajectory(opts.pred); });
        auto encoder = make_encoder(cfg.encoder);
        const std::string id = opts.pred.stem().string();
        SampleReport report = in_file(opts.pred, [&] {
            return score_sample(ref, pred, cfg.alignment, *encoder, cfg.policy, id);
        });
        if (opts.format == OutputFormat::Csv) {
            emit(leaderboard_csv(id, aggregate({report}, {}, cfg.weights)), opts.out, out);
        } else {
            nlohmann::json doc = sample_document(report, cfg);
            doc["config"]["encoder_identity"] = encoder->identity();
            emit(render_json(doc), opts.out, out);
        }
    });
}

int cmd_batch(const BatchOptions& opts, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        BatchResult result = run_batch(opts, cfg);
        for (const auto& w : result.warnings) {
            err << "warning: " << w << "\n";
        }
        std::string model = opts.model;
        if (model.empty()) {
            model = fs::absolute(opts.pred_dir).lexically_normal().filename().string();
            if (model.empty()) {
                model = fs::absolute(opts.pred_dir).lexically_normal().parent_path().filename().string();
            }
        }
        const std::string csv = leaderboard_csv(model, result.corpus);
        nlohmann::json doc = corpus_document(result.corpus, cfg, result.warnings);
        doc["corpus"]["model"] = model;
        doc["config"]["encoder_identity"] = result.encoder_identity;
        if (result.task) {
            doc["judges"]["task_comp"] = to_json(*result.task);
        }
        if (result.grounding) {
            doc["judges"]["info_grnd"] = to_json(*result.grounding);
        }
        emit(opts.format == OutputFormat::Csv ? csv : render_json(doc), opts.out, out);
        if (opts.csv_out) {
            emit(csv, opts.csv_out, out);
        }
    });
}

int cmd_classify_calls(const ClassifyOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto registry = in_file(opts.registry, [&] { return load_registry(opts.registry); });
        const auto entries = in_file(opts.log, [&] { return load_call_log(opts.log); });
        const auto dist = in_file(opts.log, [&] { return outcome_distribution(entries, registry); });
        nlohmann::json per = nlohmann::json::array();
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto& e = entries[i];
            per.push_back({{"index", i},
                           {"name", e.parsed_name ? nlohmann::json(*e.parsed_name) : nlohmann::json(nullptr)},
                           {"outcome", outcome_name(classify_call(e, registry))}});
        }
        nlohmann::json doc = to_json(dist);
        doc["entries"] = per;
        emit(render_json(doc), opts.out, out);
    });
}

int cmd_judge_aggregate(const JudgeOptions& opts, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        cfg.validate();
        const auto metric = judge_responses_file(opts.responses, opts.mode, cfg, opts.scale);
        nlohmann::json doc = to_json(metric);
        doc["mode"] = opts.mode == JudgeMode::Task ? "task" : "grounding";
        emit(render_json(doc), opts.out, out);
    });
}

int cmd_render_prompt(const RenderOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const PromptTemplate t = parse_template_name(opts.template_name);
        std::map<std::string, std::string> context;
        if (opts.context_file) {
            const auto doc = read_json(*opts.context_file);
            if (!doc.is_object()) {
                throw FileError(SchemaError("prompt context must be a JSON object"), opts.context_file->string());
            }
            for (const auto& [k, v] : doc.items()) {
                context[k] = v.is_string() ? v.get<std::string>() : v.dump();
            }
        }
        for (const auto& [k, v] : opts.context) {
            context[k] = v;
        }
        emit(render_prompt(t, context), opts.out, out);
    });
}

}  // namespace trajalign
