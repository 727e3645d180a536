#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "phgmm/checkpoint.hpp"
#include "phgmm/data.hpp"
#include "phgmm/plot.hpp"
#include "phgmm/trainer.hpp"

namespace fs = std::filesystem;
using namespace phgmm;

namespace {

// Union of the dataset recipe, the training configuration and the artifact
// paths; filled from a key=value config file, then overridden by flags.
struct RunConfig {
    SceneSpec scene;
    int n_train = 64;
    int n_val = 32;
    TrainConfig train;
    std::vector<int> k_values;  // nonempty: train sweeps one run per k
    std::string data;           // dataset root
    std::string out;
    std::string split = "val";
    std::vector<int> widths;  // trimap widths; empty means 1..30 by stride
    int trimap_stride = 1;
};

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw config_error("config key " + key + " needs an integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw config_error("config key " + key + " needs a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw config_error("config key " + key + " needs true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string cell;
    while (std::getline(ss, cell, ','))
        if (!cell.empty()) out.push_back(parse_int(key, cell));
    if (out.empty())
        throw config_error("config key " + key + " needs a comma-separated list");
    return out;
}

CountRange parse_count(const std::string& key, const std::string& v) {
    const auto list = parse_int_list(key, v);
    if (list.size() != 2)
        throw config_error("config key " + key + " needs 'lo,hi'");
    return {list[0], list[1]};
}

void apply_key(RunConfig& rc, const std::string& key, const std::string& v) {
    ModelConfig& m = rc.train.model;
    if (key == "canvas_h") rc.scene.canvas_h = parse_int(key, v);
    else if (key == "canvas_w") rc.scene.canvas_w = parse_int(key, v);
    else if (key == "classes") m.classes = rc.scene.classes = parse_int(key, v);
    else if (key == "data_seed") rc.scene.seed = uint64_t(std::stoull(v));
    else if (key == "noise_amp") rc.scene.noise_amp = parse_double(key, v);
    else if (key == "rect_frac_lo") rc.scene.rect_frac_lo = parse_double(key, v);
    else if (key == "rect_frac_hi") rc.scene.rect_frac_hi = parse_double(key, v);
    else if (key == "count_rect") rc.scene.counts[0] = parse_count(key, v);
    else if (key == "count_bar") rc.scene.counts[1] = parse_count(key, v);
    else if (key == "count_disk") rc.scene.counts[2] = parse_count(key, v);
    else if (key == "count_square") rc.scene.counts[3] = parse_count(key, v);
    else if (key == "count_triangle") rc.scene.counts[4] = parse_count(key, v);
    else if (key == "n_train") rc.n_train = parse_int(key, v);
    else if (key == "n_val") rc.n_val = parse_int(key, v);
    else if (key == "epochs") rc.train.epochs = parse_int(key, v);
    else if (key == "batch_size") rc.train.batch_size = parse_int(key, v);
    else if (key == "lr") rc.train.lr = parse_double(key, v);
    else if (key == "beta1") rc.train.beta1 = parse_double(key, v);
    else if (key == "beta2") rc.train.beta2 = parse_double(key, v);
    else if (key == "adam_eps") rc.train.adam_eps = parse_double(key, v);
    else if (key == "seed") rc.train.seed = std::stoull(v);
    else if (key == "lambda_g") rc.train.weights.lambda_g = parse_double(key, v);
    else if (key == "lambda_z") rc.train.weights.lambda_z = parse_double(key, v);
    else if (key == "lambda_s") rc.train.weights.lambda_s = parse_double(key, v);
    else if (key == "eval_interval") rc.train.eval_interval = parse_int(key, v);
    else if (key == "checkpoint_interval")
        rc.train.checkpoint_interval = parse_int(key, v);
    else if (key == "augment") rc.train.augment = parse_bool(key, v);
    else if (key == "latent_snapshots") {
        rc.train.latent_snapshots.clear();
        for (int s : parse_int_list(key, v)) rc.train.latent_snapshots.push_back(s);
    } else if (key == "k") m.k = parse_int(key, v);
    else if (key == "dz") m.dz = parse_int(key, v);
    else if (key == "dg") m.dg = parse_int(key, v);
    else if (key == "d_embed") m.d_embed = parse_int(key, v);
    else if (key == "m_embed") m.m_embed = parse_int(key, v);
    else if (key == "fused_depth") m.fused_depth = parse_int(key, v);
    else if (key == "depth_scale") m.depth_scale = parse_int(key, v);
    else if (key == "stem_kernel") m.stem_kernel = parse_int(key, v);
    else if (key == "units") m.units = parse_int_list(key, v);
    else if (key == "dilations") m.dilations = parse_int_list(key, v);
    else if (key == "decoder_units") m.decoder_units = parse_int(key, v);
    else if (key == "use_global") m.use_global = parse_bool(key, v);
    else if (key == "k_values") rc.k_values = parse_int_list(key, v);
    else if (key == "data") rc.data = v;
    else if (key == "out") rc.out = v;
    else if (key == "split") rc.split = v;
    else if (key == "widths") rc.widths = parse_int_list(key, v);
    else if (key == "trimap_stride") rc.trimap_stride = parse_int(key, v);
    else throw config_error("unknown config key: " + key);
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// json scalars and arrays flatten back to the key=value form apply_key takes
void apply_json_value(RunConfig& rc, const std::string& key,
                      const nlohmann::json& v) {
    if (v.is_string()) {
        apply_key(rc, key, v.get<std::string>());
        return;
    }
    if (v.is_array()) {
        if (v.empty()) {
            if (key == "k_values") rc.k_values.clear();
            else if (key == "widths") rc.widths.clear();
            else if (key == "latent_snapshots") rc.train.latent_snapshots.clear();
            else throw config_error("config key " + key + " needs a non-empty list");
            return;
        }
        std::string joined;
        for (size_t i = 0; i < v.size(); ++i) {
            if (i) joined += ',';
            joined += v[i].dump();
        }
        apply_key(rc, key, joined);
        return;
    }
    apply_key(rc, key, v.dump());
}

void load_config_file(const std::string& path, RunConfig& rc) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open config file: " + path);
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
        nlohmann::json j;
        try {
            f >> j;
        } catch (const nlohmann::json::exception&) {
            throw config_error("config file is not valid json: " + path);
        }
        if (!j.is_object())
            throw config_error("config file must hold one json object: " + path);
        for (const auto& [key, value] : j.items()) apply_json_value(rc, key, value);
        return;
    }
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw config_error(path + ":" + std::to_string(lineno) +
                               ": expected key=value");
        apply_key(rc, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

nlohmann::json resolved_json(const RunConfig& rc) {
    const ModelConfig& m = rc.train.model;
    nlohmann::json j;
    j["canvas_h"] = rc.scene.canvas_h;
    j["canvas_w"] = rc.scene.canvas_w;
    j["classes"] = m.classes;
    j["data_seed"] = rc.scene.seed;
    j["noise_amp"] = rc.scene.noise_amp;
    j["rect_frac_lo"] = rc.scene.rect_frac_lo;
    j["rect_frac_hi"] = rc.scene.rect_frac_hi;
    const char* count_keys[5] = {"count_rect", "count_bar", "count_disk",
                                 "count_square", "count_triangle"};
    for (int i = 0; i < 5; ++i)
        j[count_keys[i]] = {rc.scene.counts[size_t(i)].lo,
                            rc.scene.counts[size_t(i)].hi};
    j["n_train"] = rc.n_train;
    j["n_val"] = rc.n_val;
    j["epochs"] = rc.train.epochs;
    j["batch_size"] = rc.train.batch_size;
    j["lr"] = rc.train.lr;
    j["beta1"] = rc.train.beta1;
    j["beta2"] = rc.train.beta2;
    j["adam_eps"] = rc.train.adam_eps;
    j["seed"] = rc.train.seed;
    j["lambda_g"] = rc.train.weights.lambda_g;
    j["lambda_z"] = rc.train.weights.lambda_z;
    j["lambda_s"] = rc.train.weights.lambda_s;
    j["eval_interval"] = rc.train.eval_interval;
    j["checkpoint_interval"] = rc.train.checkpoint_interval;
    j["augment"] = rc.train.augment;
    j["latent_snapshots"] = rc.train.latent_snapshots;
    j["k"] = m.k;
    j["dz"] = m.dz;
    j["dg"] = m.dg;
    j["d_embed"] = m.d_embed;
    j["m_embed"] = m.m_embed;
    j["fused_depth"] = m.fused_depth;
    j["depth_scale"] = m.depth_scale;
    j["stem_kernel"] = m.stem_kernel;
    j["units"] = m.units;
    j["dilations"] = m.dilations;
    j["decoder_units"] = m.decoder_units;
    j["use_global"] = m.use_global;
    j["k_values"] = rc.k_values;
    j["data"] = rc.data;
    j["out"] = rc.out;
    j["split"] = rc.split;
    j["widths"] = rc.widths;
    j["trimap_stride"] = rc.trimap_stride;
    return j;
}

void write_resolved(const RunConfig& rc, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory: " + dir);
    std::ofstream f(dir + "/resolved_config.json", std::ios::trunc);
    if (!f) throw io_error("cannot write " + dir + "/resolved_config.json");
    f << resolved_json(rc).dump(2) << "\n";
}

void ensure_overwritable(const std::string& marker, bool force) {
    if (!force && fs::exists(marker))
        throw refusal_error("output already exists: " + marker +
                            " (pass --force to overwrite)");
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw config_error(msg);
}

DatasetManifest open_dataset(const RunConfig& rc) {
    require(!rc.data.empty(), "a dataset root is required (--data or data=)");
    const DatasetManifest manifest = load_manifest(rc.data);
    if (manifest.classes() != rc.train.model.classes)
        throw config_error("config declares " +
                           std::to_string(rc.train.model.classes) +
                           " classes but the dataset has " +
                           std::to_string(manifest.classes()));
    return manifest;
}

Model load_model(const RunConfig& rc, const std::string& checkpoint) {
    require(!checkpoint.empty(), "a checkpoint is required (--checkpoint)");
    Model model(rc.train.model, rc.train.seed);
    auto params = model.all_params();
    AdamState opt;
    load_checkpoint(checkpoint, params, opt, "");
    return model;
}

struct LogRow {
    int epoch = 0;
    double l_g = 0, l_z = 0, l_s = 0, total = 0;
    double val = std::numeric_limits<double>::quiet_NaN();
};

std::vector<LogRow> read_train_log(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open " + path);
    std::vector<LogRow> rows;
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        LogRow r;
        double* fields[4] = {&r.l_g, &r.l_z, &r.l_s, &r.total};
        if (!std::getline(ss, cell, ',')) continue;
        r.epoch = std::atoi(cell.c_str());
        for (double* fptr : fields) {
            if (!std::getline(ss, cell, ','))
                throw io_error("corrupt train log row: " + line);
            *fptr = std::strtod(cell.c_str(), nullptr);
        }
        if (std::getline(ss, cell, ',') && !cell.empty())
            r.val = std::strtod(cell.c_str(), nullptr);
        rows.push_back(r);
    }
    return rows;
}

// Plots are re-rendered from the CSV so every figure is regenerable.
void render_train_plots(const std::string& dir) {
    const auto rows = read_train_log(dir + "/train_log.csv");
    if (rows.empty()) return;
    PlotSeries lg{"l_g", {}, {}}, lz{"l_z", {}, {}}, ls{"l_s", {}, {}},
        total{"total", {}, {}}, val{"val_miou", {}, {}};
    bool any_val = false;
    for (const auto& r : rows) {
        const double e = double(r.epoch);
        lg.x.push_back(e);
        lg.y.push_back(r.l_g);
        lz.x.push_back(e);
        lz.y.push_back(r.l_z);
        ls.x.push_back(e);
        ls.y.push_back(r.l_s);
        total.x.push_back(e);
        total.y.push_back(r.total);
        val.x.push_back(e);
        val.y.push_back(r.val);
        any_val = any_val || !std::isnan(r.val);
    }
    plot_lines(dir + "/loss_curve.png", "training loss", "epoch", "loss",
               {lg, lz, ls, total});
    if (any_val)
        plot_lines(dir + "/val_curve.png", "validation miou", "epoch", "miou",
                   {val});
}

int cmd_gen_data(const RunConfig& rc, bool force) {
    require(!rc.out.empty(), "gen-data needs an output root (--out or out=)");
    ensure_overwritable(rc.out + "/manifest.json", force);
    generate_dataset(rc.scene, rc.n_train, rc.n_val, rc.out);
    write_resolved(rc, rc.out);
    std::cout << rc.out << "/manifest.json\n";
    return 0;
}

int run_one_training(const RunConfig& rc, const DatasetManifest& manifest,
                     const std::string& dir, const std::string& resume_from,
                     bool force) {
    ensure_overwritable(dir + "/train_log.csv", force);
    write_resolved(rc, dir);
    Trainer trainer(rc.train, manifest);
    if (!resume_from.empty()) trainer.resume(resume_from);
    const TrainResult res = trainer.run(dir);
    render_train_plots(dir);
    std::string note = "run " + dir + ": " + std::to_string(res.steps) + " steps";
    if (!res.epoch_loss.empty())
        note += ", final loss " + fmt_g(res.epoch_loss.back().total);
    for (auto it = res.val_miou.rbegin(); it != res.val_miou.rend(); ++it)
        if (!std::isnan(*it)) {
            note += ", val miou " + fmt_g(*it);
            break;
        }
    std::cout << note << "\n";
    return 0;
}

int cmd_train(const RunConfig& rc, const std::string& resume_from, bool force) {
    require(!rc.out.empty(), "train needs an output directory (--out or out=)");
    const DatasetManifest manifest = open_dataset(rc);
    if (rc.k_values.empty())
        return run_one_training(rc, manifest, rc.out, resume_from, force);
    require(resume_from.empty(), "--resume cannot be combined with a k_values sweep");
    for (int k : rc.k_values) {
        RunConfig sub = rc;
        sub.train.model.k = k;
        sub.k_values.clear();
        sub.out = rc.out + "/k" + std::to_string(k);
        run_one_training(sub, manifest, sub.out, "", force);
    }
    return 0;
}

int cmd_eval(const RunConfig& rc, const std::string& checkpoint, bool force) {
    require(!rc.out.empty(), "eval needs an output directory (--out or out=)");
    const DatasetManifest manifest = open_dataset(rc);
    Model model = load_model(rc, checkpoint);
    const auto it = manifest.splits.find(rc.split);
    if (it == manifest.splits.end() || it->second.empty())
        throw config_error("split '" + rc.split + "' is empty");
    ensure_overwritable(rc.out + "/scores.csv", force);
    write_resolved(rc, rc.out);

    const int c = manifest.classes();
    ConfusionMatrix cm(c);
    for (const auto& id : it->second) {
        const Sample s = load_sample(manifest, id);
        const auto pred = predict_mask(model, s);
        cm.add(confusion(pred, s.mask, c));
        write_mask_png(rc.out + "/pred_" + id + ".png", pred, s.h, s.w,
                       manifest.palette);
    }
    const ClassScores sc = scores(cm);

    std::ofstream f(rc.out + "/scores.csv", std::ios::trunc);
    if (!f) throw io_error("cannot write " + rc.out + "/scores.csv");
    f << "class,name,iou,precision,recall\n";
    auto cell = [](const std::optional<double>& v) {
        return v ? fmt_g(*v) : std::string();
    };
    for (int i = 0; i < c; ++i)
        f << i << ',' << manifest.class_names[size_t(i)] << ','
          << cell(sc.iou[size_t(i)]) << ',' << cell(sc.precision[size_t(i)])
          << ',' << cell(sc.recall[size_t(i)]) << "\n";
    f << "mean," << ',' << fmt_g(sc.mean_iou) << ',' << fmt_g(sc.mean_precision)
      << ',' << fmt_g(sc.mean_recall) << "\n";
    f << "mean_iou_pct," << ',' << fmt_g(sc.mean_iou_pct) << ",,\n";
    std::cout << "split " << rc.split << ": mean iou " << fmt_g(sc.mean_iou_pct)
              << "%\n";
    return 0;
}

int cmd_trimap(const RunConfig& rc, const std::string& checkpoint,
               const std::string& widths_flag, bool force) {
    require(!rc.out.empty(), "trimap needs an output directory (--out or out=)");
    const DatasetManifest manifest = open_dataset(rc);
    Model model = load_model(rc, checkpoint);

    std::vector<int> widths = rc.widths;
    if (!widths_flag.empty()) widths = parse_int_list("--widths", widths_flag);
    if (widths.empty()) {
        require(rc.trimap_stride >= 1, "trimap_stride must be >= 1");
        for (int w = 1; w <= 30; w += rc.trimap_stride) widths.push_back(w);
    }
    ensure_overwritable(rc.out + "/trimap.csv", force);
    write_resolved(rc, rc.out);

    const auto curve = trimap_curve(model, manifest, rc.split, widths);
    std::ofstream f(rc.out + "/trimap.csv", std::ios::trunc);
    if (!f) throw io_error("cannot write " + rc.out + "/trimap.csv");
    f << "width,error,empty_band\n";
    PlotSeries series{"error", {}, {}};
    for (const auto& pt : curve) {
        f << pt.width << ',' << fmt_g(pt.error) << ',' << int(pt.empty_band)
          << "\n";
        series.x.push_back(pt.width);
        series.y.push_back(pt.error);
    }
    plot_lines(rc.out + "/trimap_curve.png", "boundary-band error", "band width",
               "error", {series});
    std::cout << rc.out << "/trimap.csv (" << curve.size() << " widths)\n";
    return 0;
}

int cmd_latent(RunConfig& rc, const std::string& checkpoint,
               const std::string& run_dir, bool force) {
    require(!run_dir.empty() || !checkpoint.empty(),
            "latent needs --run and/or --checkpoint");
    if (rc.out.empty()) rc.out = run_dir;
    require(!rc.out.empty(), "latent needs an output directory (--out or --run)");
    std::error_code ec;
    fs::create_directories(rc.out, ec);
    if (ec) throw io_error("cannot create output directory: " + rc.out);
    ensure_overwritable(rc.out + "/latent_metrics.csv", force);

    std::vector<std::pair<long, LatentCloud>> clouds;
    if (!run_dir.empty()) {
        if (!fs::is_directory(run_dir))
            throw io_error("run directory not found: " + run_dir);
        for (const auto& entry : fs::directory_iterator(run_dir)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("latents_step_", 0) != 0 ||
                name.size() <= std::string("latents_step_.csv").size() ||
                name.substr(name.size() - 4) != ".csv")
                continue;
            const long step = std::atol(name.c_str() + std::string("latents_step_").size());
            clouds.emplace_back(step, read_latent_csv(entry.path().string()));
        }
    }
    if (!checkpoint.empty()) {
        const DatasetManifest manifest = open_dataset(rc);
        Model model(rc.train.model, rc.train.seed);
        auto params = model.all_params();
        AdamState opt;
        const CheckpointMeta meta = load_checkpoint(checkpoint, params, opt, "");
        LatentCloud cloud = collect_latents(model, manifest, rc.split, meta.step);
        write_latent_csv(rc.out + "/latents_step_" + std::to_string(meta.step) +
                             ".csv",
                         cloud);
        clouds.emplace_back(meta.step, std::move(cloud));
    }
    require(!clouds.empty(), "no latent snapshots found");
    std::sort(clouds.begin(), clouds.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    write_resolved(rc, rc.out);

    std::ofstream f(rc.out + "/latent_metrics.csv", std::ios::trunc);
    if (!f) throw io_error("cannot write " + rc.out + "/latent_metrics.csv");
    f << "iteration,points,ssi,chi,dbi\n";
    for (const auto& [step, cloud] : clouds) {
        auto guarded = [&](double (*metric)(const LatentCloud&)) {
            try {
                return fmt_g(metric(cloud));
            } catch (const numeric_error& e) {
                std::cerr << "latents at step " << step << ": " << e.what()
                          << "\n";
                return std::string();
            }
        };
        f << step << ',' << cloud.n() << ',' << guarded(silhouette) << ','
          << guarded(calinski_harabasz) << ',' << guarded(davies_bouldin)
          << "\n";
        const auto proj = project_2d(cloud);
        plot_scatter(rc.out + "/latent_proj_" + std::to_string(step) + ".png",
                     "latent cloud at step " + std::to_string(step), proj,
                     cloud.labels);
    }
    std::cout << rc.out << "/latent_metrics.csv (" << clouds.size()
              << " snapshots)\n";
    return 0;
}

int cmd_gradcheck(const RunConfig& rc) {
    const GradcheckReport rep = gradcheck(rc.train, rc.train.seed);
    std::cout << rep.summary();
    return rep.pass ? 0 : 4;
}

void check_thread_cap() {
    const char* env = std::getenv("PHGMM_THREADS");
    if (env == nullptr || *env == '\0') return;
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == nullptr || *end != '\0' || cap < 1)
        throw config_error("PHGMM_THREADS must be a positive integer, got '" +
                           std::string(env) + "'");
    // Compute is single-threaded, so any valid cap already holds.
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic-scene segmentation with a mixture latent space"};
    app.require_subcommand(1);

    struct Flags {
        std::string config, out, data, checkpoint, run_dir, widths, resume;
        uint64_t seed = 0;
        bool force = false;
    } fl;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", fl.config, "key=value or resolved-json config file");
        sub->add_option("--seed", fl.seed, "training seed override");
        sub->add_option("--out", fl.out, "output directory");
        sub->add_flag("--force", fl.force, "overwrite existing outputs");
        return sub;
    };

    CLI::App* gen = add_common(app.add_subcommand("gen-data", "generate a synthetic dataset"));
    CLI::App* train = add_common(app.add_subcommand("train", "train a model"));
    train->add_option("--data", fl.data, "dataset root");
    train->add_option("--resume", fl.resume, "checkpoint to resume from");
    CLI::App* eval = add_common(app.add_subcommand("eval", "score a checkpoint on a split"));
    eval->add_option("--data", fl.data, "dataset root");
    eval->add_option("--checkpoint", fl.checkpoint, "checkpoint file");
    CLI::App* trimap = add_common(app.add_subcommand("trimap", "boundary-band error curve"));
    trimap->add_option("--data", fl.data, "dataset root");
    trimap->add_option("--checkpoint", fl.checkpoint, "checkpoint file");
    trimap->add_option("--widths", fl.widths, "comma-separated band widths");
    CLI::App* latent = add_common(app.add_subcommand("latent", "latent cloud diagnostics"));
    latent->add_option("--data", fl.data, "dataset root");
    latent->add_option("--checkpoint", fl.checkpoint, "checkpoint file");
    latent->add_option("--run", fl.run_dir, "training run directory with latent snapshots");
    CLI::App* gradchk = add_common(app.add_subcommand("gradcheck", "finite-difference gradient audit"));
    (void)gen;
    (void)gradchk;

    std::string split_flag;
    for (CLI::App* sub : {eval, trimap, latent})
        sub->add_option("--split", split_flag, "dataset split");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        check_thread_cap();
        RunConfig rc;
        if (!fl.config.empty()) load_config_file(fl.config, rc);
        for (CLI::App* sub : {gen, train, eval, trimap, latent, gradchk}) {
            if (!sub->parsed()) continue;
            if (sub->count("--seed")) rc.train.seed = fl.seed;
            if (sub->count("--out")) rc.out = fl.out;
        }
        if (!fl.data.empty()) rc.data = fl.data;
        if (!split_flag.empty()) rc.split = split_flag;

        if (gen->parsed()) return cmd_gen_data(rc, fl.force);
        if (train->parsed()) return cmd_train(rc, fl.resume, fl.force);
        if (eval->parsed()) return cmd_eval(rc, fl.checkpoint, fl.force);
        if (trimap->parsed()) return cmd_trimap(rc, fl.checkpoint, fl.widths, fl.force);
        if (latent->parsed()) return cmd_latent(rc, fl.checkpoint, fl.run_dir, fl.force);
        if (gradchk->parsed()) return cmd_gradcheck(rc);
        return 2;
    } catch (const refusal_error& e) {
        std::cerr << "refused: " << e.what() << "\n";
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
