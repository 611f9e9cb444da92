#include "snp/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "snp/dataset.hpp"
#include "snp/errors.hpp"
#include "snp/eval.hpp"
#include "snp/guidance.hpp"
#include "snp/image_io.hpp"
#include "snp/splitmix.hpp"
#include "snp/sweep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace snp::cli {

namespace {

// Maps thrown errors onto the documented exit codes.
int exit_code_for(const std::exception& e, std::ostream& log) {
    log << "error: " << e.what() << "\n";
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const IoError*>(&e) ||
        dynamic_cast<const ContractViolation*>(&e))
        return kExitConfig;
    if (dynamic_cast<const BackendError*>(&e)) return kExitBackend;
    if (const auto* d = dynamic_cast<const DatasetError*>(&e)) {
        for (const std::string& m : d->missing) log << "  missing: " << m << "\n";
        return kExitDataset;
    }
    return 1;
}

std::vector<int> parse_site_list(const std::string& csv) {
    std::vector<int> out;
    std::string cur;
    std::istringstream ss(csv);
    while (std::getline(ss, cur, ',')) {
        size_t b = cur.find_first_not_of(" \t");
        if (b == std::string::npos) throw ConfigError("empty site index in '" + csv + "'");
        size_t e = cur.find_last_not_of(" \t");
        out.push_back(std::stoi(cur.substr(b, e - b + 1)));
    }
    return out;
}

}  // namespace

ExperimentConfig resolve_config(const GenerateOptions& options) {
    ExperimentConfig cfg;
    if (options.config_path) cfg = ExperimentConfig::parse_file(*options.config_path);
    for (const std::string& assignment : options.sets) {
        size_t eq = assignment.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
        cfg.set_path(assignment.substr(0, eq), assignment.substr(eq + 1));
    }
    if (options.seed) cfg.run.seed = *options.seed;
    if (options.out) cfg.run.out = *options.out;
    if (options.prompt) cfg.manifest.prompt = *options.prompt;
    if (options.negative_prompt) cfg.manifest.negative_prompt = *options.negative_prompt;
    if (options.depth_path) cfg.manifest.depth = *options.depth_path;

    if (const char* forced = std::getenv("SNP_BACKEND"); forced != nullptr && *forced != '\0') {
        std::string kind = forced;
        if (kind != "toy" && kind != "real")
            throw ConfigError("SNP_BACKEND must be toy or real, got '" + kind + "'");
        cfg.backend.kind = kind;
    }
    cfg.validate();
    return cfg;
}

std::unique_ptr<DenoiserBackend> build_backend(const ExperimentConfig& config) {
    if (config.backend.kind == "real") return make_real_backend(config.backend.real);
    return std::make_unique<ToyBackend>(config.backend.toy);
}

RoutingTable routing_table_for(const ExperimentConfig& config, const DenoiserBackend& backend) {
    RoutingTable table = RoutingTable::with_builtins();
    table.register_backend(backend);
    for (const auto& [id, csv] : config.routing_entries) {
        RoutingMask mask;
        if (!csv.empty())
            for (int s : parse_site_list(csv)) mask.active_sites.insert(s);
        table.set(id, mask);
    }
    return table;
}

RoutingMask resolve_routing(const std::string& routing, const RoutingTable& table,
                            const DenoiserBackend& backend) {
    if (routing == "all") return RoutingMask::all(backend.site_count());
    if (routing == "none") return RoutingMask::none();
    if (routing == "pose") return table.default_pose_mask(backend.id());
    if (!routing.empty() && (std::isdigit(static_cast<unsigned char>(routing[0])) != 0)) {
        RoutingMask mask;
        for (int s : parse_site_list(routing)) mask.active_sites.insert(s);
        mask.validate(backend.site_count());
        return mask;
    }
    // Any other name is looked up in the routing table.
    return table.default_pose_mask(routing);
}

GuidanceConfig guidance_from(const ExperimentConfig& config, const RoutingMask& mask) {
    GuidanceConfig g;
    g.scale_s = config.guidance.scale;
    g.lambda_t = config.guidance.lambda_t;
    g.use_negative_control = config.guidance.use_negative_control;
    g.routing_mask = mask;
    if (config.wcm.enabled) g.wcm = config.wcm.params;
    return g;
}

RunOutcome execute_run(const ExperimentConfig& resolved, const std::string& cell_key,
                       const std::string& runid) {
    std::unique_ptr<DenoiserBackend> backend = build_backend(resolved);
    RoutingTable table = routing_table_for(resolved, *backend);
    GuidanceConfig guidance =
        guidance_from(resolved, resolve_routing(resolved.guidance.routing, table, *backend));

    if (resolved.manifest.depth.empty())
        throw ConfigError("no depth condition given (--depth or manifest.depth)");
    DepthCondition condition{read_depth_file(resolved.manifest.depth)};
    condition.validate();

    PromptPair prompts{backend->embed_prompt(resolved.manifest.prompt),
                       backend->embed_prompt(resolved.manifest.negative_prompt)};

    RunOutcome outcome;
    outcome.runid = runid;
    outcome.cell_dir = fs::path(resolved.run.out) / runid / cell_key;
    fs::create_directories(outcome.cell_dir);

    GaussianStream noise(resolved.run.seed);
    double sum = 0.0, sum_sq = 0.0;
    size_t count = 0;
    for (int b = 0; b < resolved.run.batch; ++b) {
        LatentState initial;
        initial.latent = Tensor4f(backend->latent_shape(1));
        for (float& v : initial.latent.data) v = noise.next();
        initial.step_index = 0;
        initial.total_steps = resolved.run.steps;

        Tensor4f final_latent = sample(initial, prompts, condition, guidance, *backend);

        char name[32];
        std::snprintf(name, sizeof name, "%03d.lat", b);
        fs::path path = outcome.cell_dir / name;
        write_latent(path, final_latent, 0);
        outcome.latents.push_back(path);

        for (float v : final_latent.data) {
            sum += v;
            sum_sq += static_cast<double>(v) * v;
        }
        count += final_latent.data.size();
    }
    if (count > 0) {
        outcome.latent_mean = sum / static_cast<double>(count);
        const double var = sum_sq / static_cast<double>(count) - outcome.latent_mean * outcome.latent_mean;
        outcome.latent_std = var > 0 ? std::sqrt(var) : 0.0;
    }

    ExperimentConfig manifest = resolved;
    manifest.manifest.cell = cell_key;
    outcome.manifest = outcome.cell_dir / "manifest.cfg";
    std::ofstream mf(outcome.manifest, std::ios::trunc);
    if (!mf) throw IoError("cannot write " + outcome.manifest.string());
    mf << manifest.canonical_text(true);
    mf << "cell = " << cell_key << "\n";
    mf << "runid = " << runid << "\n";
    return outcome;
}

int run_generate(const GenerateOptions& options, std::ostream& log) {
    try {
        ExperimentConfig cfg = resolve_config(options);
        RunOutcome outcome = execute_run(cfg, "base", cfg.run_id());
        log << "runid " << outcome.runid << "\n";
        for (const fs::path& p : outcome.latents) log << "wrote " << p.string() << "\n";
        log << "manifest " << outcome.manifest.string() << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        return exit_code_for(e, log);
    }
}

int run_ablate(const AblateOptions& options, std::ostream& log) {
    try {
        ExperimentConfig base = resolve_config(options.base);

        std::vector<SweepAxis> axes;
        for (const std::string& s : options.sweeps) axes.push_back(SweepAxis::parse(s));
        // Every path must resolve against the config with every value.
        for (const SweepAxis& axis : axes) {
            for (const std::string& v : axis.values) {
                ExperimentConfig probe = base;
                probe.set_path(axis.path, v);
            }
        }
        std::vector<SweepCell> cells = expand_sweep(axes);

        // The run id covers the base config plus the sweep spec, so
        // distinct sweeps never share a directory.
        std::string hash_input = base.canonical_text(true);
        for (const SweepAxis& axis : axes) {
            hash_input += "\n[sweep] " + axis.path + " =";
            for (const std::string& v : axis.values) hash_input += " " + v;
        }
        uint64_t h = fnv1a64(hash_input);
        char runid[17];
        std::snprintf(runid, sizeof runid, "%016llx", static_cast<unsigned long long>(h));

        struct CellResult {
            std::string key;
            bool ok = false;
            std::string error;
            RunOutcome outcome;
        };
        std::vector<CellResult> results;
        int failures = 0;
        for (const SweepCell& cell : cells) {
            CellResult r;
            r.key = cell.key();
            try {
                ExperimentConfig cfg = base;
                for (const auto& [path, value] : cell.assignments) cfg.set_path(path, value);
                cfg.validate();
                r.outcome = execute_run(cfg, r.key, runid);
                r.ok = true;
            } catch (const std::exception& e) {
                r.error = e.what();
                ++failures;
            }
            results.push_back(std::move(r));
        }

        fs::path run_dir = fs::path(base.run.out) / runid;
        fs::create_directories(run_dir);

        size_t key_width = 4;
        for (const CellResult& r : results) key_width = std::max(key_width, r.key.size() + 2);

        json summary = json::array();
        std::ostringstream table;
        table << std::left << std::setw(static_cast<int>(key_width)) << "cell" << std::setw(8)
              << "status" << std::setw(14) << "latent_mean" << std::setw(14) << "latent_std"
              << "outputs\n";
        for (const CellResult& r : results) {
            json row{{"cell", r.key}, {"status", r.ok ? "ok" : "error"}};
            table << std::left << std::setw(static_cast<int>(key_width)) << r.key << std::setw(8)
                  << (r.ok ? "ok" : "error");
            if (r.ok) {
                row["latent_mean"] = r.outcome.latent_mean;
                row["latent_std"] = r.outcome.latent_std;
                row["dir"] = r.outcome.cell_dir.string();
                row["outputs"] = r.outcome.latents.size();
                table << std::setw(14) << std::setprecision(6) << r.outcome.latent_mean
                      << std::setw(14) << r.outcome.latent_std << r.outcome.latents.size()
                      << "\n";
            } else {
                row["error"] = r.error;
                table << std::setw(14) << "-" << std::setw(14) << "-" << r.error << "\n";
            }
            summary.push_back(std::move(row));
        }

        std::ofstream jf(run_dir / "summary.json", std::ios::trunc);
        jf << summary.dump(2) << "\n";
        std::ofstream tf(run_dir / "summary.txt", std::ios::trunc);
        tf << table.str();
        log << table.str();
        log << "runid " << runid << "\n";
        log << "summary " << (run_dir / "summary.txt").string() << "\n";

        if (failures == static_cast<int>(results.size()) && failures > 0) {
            log << "error: all " << failures << " sweep cells failed\n";
            return 1;
        }
        return kExitOk;
    } catch (const std::exception& e) {
        return exit_code_for(e, log);
    }
}

namespace {

std::vector<std::vector<float>> gather_feats(const fs::path& dir,
                                             std::vector<std::string>& missing) {
    std::vector<std::vector<float>> feats;
    std::vector<DatasetItem> items = scan_dataset(dir);
    if (!items.empty()) {
        for (const DatasetItem& item : items) {
            if (item.feat)
                feats.push_back(read_feat(*item.feat));
            else
                missing.push_back((dir / (item.id + ".feat")).string());
        }
        return feats;
    }
    // No images: treat the directory as a bare feature-vector set.
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".feat")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) feats.push_back(read_feat(f));
    return feats;
}

}  // namespace

int run_eval(const EvalOptions& options, std::ostream& log) {
    try {
        const std::string& mode = options.mode;
        if (mode != "pose" && mode != "clip" && mode != "fid" && mode != "full")
            throw ConfigError("mode must be pose, clip, fid or full, got '" + mode + "'");
        if (mode == "fid" && !options.ref_dir)
            throw ConfigError("fid mode requires --ref <dir>");

        std::vector<DatasetItem> items = scan_dataset(options.dataset);
        if (items.empty())
            throw DatasetError("no images (<root>/<id>.png) under " + options.dataset);

        json report;
        report["dataset"] = options.dataset;
        report["mode"] = mode;
        report["count"] = items.size();
        std::ostringstream text;
        text << "dataset " << options.dataset << " (" << items.size() << " images, mode " << mode
             << ")\n";

        // Pose error.
        const bool want_pose = mode == "pose" || mode == "full";
        size_t with_pose = 0;
        for (const DatasetItem& i : items) with_pose += i.pose_json.has_value();
        if (want_pose && (mode == "pose" || with_pose > 0)) {
            std::vector<std::string> missing;
            for (const DatasetItem& i : items)
                if (!i.pose_json) missing.push_back((fs::path(options.dataset) / (i.id + ".pose.json")).string());
            if (!missing.empty())
                throw DatasetError("pose sidecars missing for " + std::to_string(missing.size()) +
                                       " of " + std::to_string(items.size()) + " images",
                                   missing);

            SidecarPoseEstimator estimator;
            std::vector<std::pair<PoseAngles, PoseAngles>> pairs;
            double sum = 0, sum_yaw = 0, sum_pitch = 0, sum_roll = 0;
            for (const DatasetItem& item : items) {
                PoseAngles gt = read_pose_json(*item.pose_json);
                PoseAngles pred = estimator.estimate(item);
                PoseErrorDetail d = pose_error_detail(pred, gt);
                sum += d.mean;
                sum_yaw += d.yaw;
                sum_pitch += d.pitch;
                sum_roll += d.roll;
                pairs.emplace_back(gt, pred);
            }
            const double n = static_cast<double>(pairs.size());
            BinnedPoseReport bins = binned_pose_report(pairs, options.bin_width);

            json pose;
            pose["mean_error"] = sum / n;
            pose["per_axis"] = {{"yaw", sum_yaw / n}, {"pitch", sum_pitch / n},
                                {"roll", sum_roll / n}};
            pose["bin_width"] = options.bin_width;
            auto bins_json = [](const std::vector<BinStat>& v) {
                json arr = json::array();
                for (const BinStat& b : v) {
                    json e{{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}};
                    if (b.count > 0)
                        e["mean_error"] = b.mean_error;
                    else
                        e["mean_error"] = nullptr;
                    arr.push_back(std::move(e));
                }
                return arr;
            };
            pose["rotation_bins"] = bins_json(bins.rotation);
            pose["elevation_bins"] = bins_json(bins.elevation);
            report["pose"] = std::move(pose);

            text << std::fixed << std::setprecision(4);
            text << "pose error (deg): mean " << sum / n << "  yaw " << sum_yaw / n << "  pitch "
                 << sum_pitch / n << "  roll " << sum_roll / n << "\n";
            auto bins_text = [&](const char* name, const std::vector<BinStat>& v) {
                text << name << " bins (by ground truth):\n";
                for (const BinStat& b : v) {
                    if (b.count == 0) continue;
                    text << "  [" << std::setw(4) << static_cast<int>(b.lo) << ","
                         << std::setw(4) << static_cast<int>(b.hi) << ")  n=" << std::setw(4)
                         << b.count << "  mean " << b.mean_error << "\n";
                }
            };
            bins_text("rotation", bins.rotation);
            bins_text("elevation", bins.elevation);
        }

        // CLIP similarity.
        const bool want_clip = mode == "clip" || mode == "full";
        size_t with_feat = 0;
        for (const DatasetItem& i : items) with_feat += i.feat.has_value();
        if (want_clip && (mode == "clip" || with_feat > 0)) {
            std::vector<std::string> missing;
            for (const DatasetItem& i : items)
                if (!i.feat) missing.push_back((fs::path(options.dataset) / (i.id + ".feat")).string());
            if (!missing.empty())
                throw DatasetError("feature sidecars missing for clip mode", missing);

            fs::path prompt_path;
            if (options.prompt_feat) {
                prompt_path = *options.prompt_feat;
            } else {
                prompt_path = fs::path(options.dataset) / "prompt.feat";
            }
            if (!fs::exists(prompt_path))
                throw DatasetError("prompt feature file not found (use --prompt-feat)",
                                   {prompt_path.string()});
            std::vector<float> prompt_feat = read_feat(prompt_path);

            double sum = 0;
            for (const DatasetItem& item : items) {
                std::vector<float> img = read_feat(*item.feat);
                sum += clip_similarity(img, prompt_feat);
            }
            const double mean = sum / static_cast<double>(items.size());
            report["clip"] = {{"mean_similarity", mean}, {"count", items.size()}};
            text << std::fixed << std::setprecision(6) << "clip similarity: mean " << mean
                 << " (n=" << items.size() << ")\n";
        }

        // Frechet distance.
        const bool want_fid = mode == "fid" || (mode == "full" && options.ref_dir.has_value());
        if (want_fid) {
            std::vector<std::string> missing;
            FeatureSet gen{gather_feats(options.dataset, missing)};
            FeatureSet ref{gather_feats(*options.ref_dir, missing)};
            if (!missing.empty()) throw DatasetError("feature files missing for fid mode", missing);
            if (ref.vectors.empty())
                throw DatasetError("no feature files under " + *options.ref_dir);
            const double fid = frechet_distance(gen, ref);
            report["fid"] = {{"value", fid},
                             {"count_generated", gen.count()},
                             {"count_reference", ref.count()},
                             {"dim", gen.dim()}};
            text << std::fixed << std::setprecision(6) << "fid: " << fid << " (" << gen.count()
                 << " vs " << ref.count() << " vectors, dim " << gen.dim() << ")\n";
        }

        if (!report.contains("pose") && !report.contains("clip") && !report.contains("fid"))
            throw DatasetError("dataset has no usable sidecars for mode '" + mode + "'");

        fs::path out_dir = options.out ? fs::path(*options.out) : fs::path(options.dataset);
        fs::create_directories(out_dir);
        std::ofstream jf(out_dir / "report.json", std::ios::trunc);
        jf << report.dump(2) << "\n";
        std::ofstream tf(out_dir / "report.txt", std::ios::trunc);
        tf << text.str();
        log << text.str();
        log << "report " << (out_dir / "report.json").string() << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        return exit_code_for(e, log);
    }
}

}  // namespace snp::cli
