// slda: stats accumulation, training, detection and benchmarking from the shell.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <slda/bench.hpp>
#include <slda/slda.hpp>
#include <slda/synthetic.hpp>

namespace fs = std::filesystem;
using namespace slda;

namespace {

constexpr int kUsageExit = 2;

/// Failure that maps to a specific exit code.
struct ExitError : Error {
    int code;
    ExitError(int c, const std::string& msg) : Error(msg), code(c) {}
};

struct Extent {
    std::size_t rows = 0, cols = 0;
};

Extent parse_extent(const std::string& s) {
    const auto x = s.find_first_of("xX");
    std::size_t a = 0, b = 0;
    try {
        if (x == std::string::npos) throw std::invalid_argument(s);
        std::size_t used = 0;
        a = std::stoul(s.substr(0, x), &used);
        if (used != x) throw std::invalid_argument(s);
        b = std::stoul(s.substr(x + 1), &used);
        if (used != s.size() - x - 1) throw std::invalid_argument(s);
    } catch (const std::exception&) {
        throw ExitError(kUsageExit, "invalid extent '" + s + "' (expected MxN)");
    }
    if (a == 0 || b == 0) throw ExitError(kUsageExit, "extent '" + s + "' must be positive");
    return {a, b};
}

std::vector<fs::path> list_images(const std::string& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw ExitError(1, dir + ": not a readable directory");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir, ec))
        if (e.path().extension() == ".pgm") out.push_back(e.path());
    if (ec) throw ExitError(1, dir + ": " + ec.message());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw ExitError(kUsageExit, dir + ": no images");
    return out;
}

struct FeatureFlags {
    std::string name = "hoglite";
    std::size_t cell = 4;
    std::size_t bins = 8;

    void add_to(CLI::App& app) {
        app.add_option("--features", name, "Feature transform")->check(CLI::IsMember({"identity", "hoglite"}));
        app.add_option("--cell", cell, "HOG-lite cell size in pixels")->check(CLI::PositiveNumber);
        app.add_option("--bins", bins, "HOG-lite orientation bins")->check(CLI::PositiveNumber);
    }
    FeatureTransform make() const { return make_transform(name, cell, bins); }
};

/// Loads and transforms every image, reporting each failure before giving up.
std::vector<std::pair<std::string, FeatureImage>> load_features(const std::vector<fs::path>& files,
                                                                const FeatureTransform& t) {
    std::vector<std::pair<std::string, FeatureImage>> out;
    std::size_t failures = 0;
    for (const auto& f : files) {
        try {
            out.emplace_back(f.filename().string(), t.apply(load_pgm(f.string())));
        } catch (const Error& e) {
            std::cerr << "error: " << f.string() << ": " << e.what() << '\n';
            ++failures;
        }
    }
    if (failures) throw ExitError(1, std::to_string(failures) + " unreadable image(s)");
    return out;
}

/// Crops a template-sized feature window from the top-left of a positive.
Template positive_window(const FeatureImage& f, std::size_t m, std::size_t n, const std::string& name) {
    if (f.height() < m || f.width() < n)
        throw ShapeError(name + ": features are " + std::to_string(f.height()) + "x" + std::to_string(f.width()) +
                         ", smaller than the " + std::to_string(m) + "x" + std::to_string(n) + " template");
    return Template::from_image(f.height() == m && f.width() == n ? f : f.crop(0, 0, m, n));
}

std::ofstream open_output(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error(path + ": cannot open for writing");
    return os;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    std::size_t negatives = 20, positives = 20, scenes = 10;
    std::string scene_size = "96x96", pattern_size = "48x48";
    std::size_t cell = 4;
    std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
    const Extent scene = parse_extent(a.scene_size), pat = parse_extent(a.pattern_size);
    if (pat.rows > scene.rows || pat.cols > scene.cols) throw ExitError(kUsageExit, "pattern larger than scene");
    synthetic::Rng rng(a.seed);
    const auto pattern = synthetic::pattern(pat.rows, pat.cols);
    for (const char* sub : {"negatives", "positives", "scenes"}) fs::create_directories(fs::path(a.out) / sub);
    auto name = [](const char* prefix, std::size_t i) {
        std::ostringstream os;
        os << prefix << std::setw(4) << std::setfill('0') << i << ".pgm";
        return os.str();
    };
    for (std::size_t i = 0; i < a.negatives; ++i)
        save_pgm((fs::path(a.out) / "negatives" / name("neg", i)).string(),
                 synthetic::texture(scene.rows, scene.cols, rng));
    for (std::size_t i = 0; i < a.positives; ++i)
        save_pgm((fs::path(a.out) / "positives" / name("pos", i)).string(), synthetic::positive_example(pattern, rng));
    auto truth = open_output((fs::path(a.out) / "truth.csv").string());
    truth << "image,u,v,m,n\n";
    const std::size_t su = (scene.rows - pat.rows) / a.cell, sv = (scene.cols - pat.cols) / a.cell;
    for (std::size_t i = 0; i < a.scenes; ++i) {
        Raster r = synthetic::texture(scene.rows, scene.cols, rng);
        const std::size_t u0 = a.cell * std::uniform_int_distribution<std::size_t>(0, su)(rng);
        const std::size_t v0 = a.cell * std::uniform_int_distribution<std::size_t>(0, sv)(rng);
        synthetic::plant(r, pattern, u0, v0);
        synthetic::add_noise(r, rng, 12.0);
        const std::string file = name("scene", i);
        save_pgm((fs::path(a.out) / "scenes" / file).string(), r);
        truth << file << ',' << u0 << ',' << v0 << ',' << pat.rows << ',' << pat.cols << '\n';
    }
    std::cout << "wrote " << a.negatives << " negatives, " << a.positives << " positives, " << a.scenes
              << " scenes to " << a.out << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct StatsArgs {
    std::string images, out;
    FeatureFlags features;
    std::size_t dmax_u = 16, dmax_v = 16;
    bool naive = false;
};

int cmd_stats(const StatsArgs& a) {
    const auto files = list_images(a.images);
    const auto transform = a.features.make();
    StationaryAccumulator acc(transform.channels, a.dmax_u, a.dmax_v);
    for (const auto& [id, f] : load_features(files, transform)) {
        if (a.naive)
            accumulate_image_naive(acc, f, id);
        else
            accumulate_image_fft(acc, f, id);
    }
    const auto stats = finalize(acc);
    save_stats(a.out, stats);
    std::cout << "images " << stats.image_count << "\npixels " << stats.pixel_count << "\nchannels "
              << stats.channels() << "\nfingerprint " << fingerprint(stats) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string stats, positives, size, method = "pcg", out, report;
    FeatureFlags features;
    double lambda = kDefaultLambda, tol = 1e-6;
    std::size_t max_iter = 500;
};

int cmd_train(const TrainArgs& a) {
    const Extent size = parse_extent(a.size);
    const Method method = parse_method(a.method);
    const Trainer trainer(load_stats(a.stats));
    const auto transform = a.features.make();
    if (transform.channels != trainer.stats().channels())
        throw ShapeError(a.features.name + " features have " + std::to_string(transform.channels) +
                         " channels but the statistics have " + std::to_string(trainer.stats().channels()));
    trainer.stats().require_cover(size.rows, size.cols, "train");

    std::vector<Template> windows;
    for (const auto& [id, f] : load_features(list_images(a.positives), transform))
        windows.push_back(positive_window(f, size.rows, size.cols, id));
    Template mean(transform.channels, size.rows, size.cols);
    for (const auto& w : windows)
        for (std::size_t i = 0; i < mean.size(); ++i) mean.values()[i] += w.values()[i] / double(windows.size());

    TrainRequest req;
    req.positive_mean = mean;
    req.method = method;
    req.lambda = a.lambda;
    req.options.tolerance = a.tol;
    req.options.max_iterations = a.max_iter;
    auto result = trainer.train(req);
    auto& det = result.detector;

    std::vector<double> pos_scores, neg_scores(1, 0.0);
    for (const auto& w : windows) {
        double s = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) s += det.weights.values()[i] * w.values()[i];
        pos_scores.push_back(s);
    }
    for (std::size_t v = 0; v < size.cols; ++v)
        for (std::size_t u = 0; u < size.rows; ++u)
            for (std::size_t p = 0; p < transform.channels; ++p)
                neg_scores[0] += det.weights.at(p, u, v) * trainer.stats().mu(p);
    calibrate_threshold(det, pos_scores, neg_scores);
    det.metadata["features"] = a.features.name;
    det.metadata["cell"] = std::to_string(transform.cell);
    det.metadata["bins"] = std::to_string(a.features.bins);
    det.metadata["positives"] = std::to_string(windows.size());
    save_detector(a.out, det);

    if (!a.report.empty()) {
        auto os = open_output(a.report);
        write_residual_csv(os, result.report);
    }
    const auto& r = result.report;
    std::cout << "method " << to_string(method) << "\ndim " << det.weights.size() << "\niterations " << r.iterations
              << "\nconverged " << (r.converged ? "yes" : "no") << "\nresidual " << r.final_residual;
    if (result.toeplitz_residual) std::cout << "\ntoeplitz_residual " << *result.toeplitz_residual;
    std::cout << "\ncold_s " << r.cold_seconds << "\nwarm_s " << r.warm_seconds << "\nthreshold " << det.threshold
              << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct DetectArgs {
    std::string detector, images, out, truth;
    std::optional<double> threshold;
    double nms_iou = 0.3, nms_cover = 0.6, match_iou = 0.5;
};

std::map<std::string, std::vector<Rect>> read_truth(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(path + ": cannot open");
    std::map<std::string, std::vector<Rect>> out;
    std::string line;
    std::getline(is, line);
    if (line != "image,u,v,m,n") throw FormatError(path + ": expected header 'image,u,v,m,n'");
    for (std::size_t lineno = 2; std::getline(is, line); ++lineno) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string image, field;
        std::getline(row, image, ',');
        Rect r;
        for (long* x : {&r.u, &r.v, &r.m, &r.n}) {
            if (!std::getline(row, field, ',')) throw FormatError(path + ":" + std::to_string(lineno) + ": short row");
            try {
                *x = std::stol(field);
            } catch (const std::exception&) {
                throw FormatError(path + ":" + std::to_string(lineno) + ": bad integer '" + field + "'");
            }
        }
        out[image].push_back(r);
    }
    return out;
}

int cmd_detect(const DetectArgs& a) {
    const auto det = load_detector(a.detector);
    auto meta = [&](const std::string& key, const std::string& fallback) {
        const auto it = det.metadata.find(key);
        return it == det.metadata.end() ? fallback : it->second;
    };
    const auto transform =
        make_transform(meta("features", "identity"), std::stoul(meta("cell", "1")), std::stoul(meta("bins", "8")));
    if (transform.channels != det.channels())
        throw ShapeError("detector has " + std::to_string(det.channels()) + " channels but " + transform.name +
                         " features have " + std::to_string(transform.channels));
    const auto truth = a.truth.empty() ? std::map<std::string, std::vector<Rect>>{} : read_truth(a.truth);

    DetectOptions opts;
    opts.threshold = a.threshold;
    opts.nms = {a.nms_iou, a.nms_cover};
    std::ofstream file;
    if (!a.out.empty()) file = open_output(a.out);
    std::ostream& os = a.out.empty() ? std::cout : file;
    write_detection_csv_header(os);
    const long c = long(transform.cell);
    for (const auto& [id, f] : load_features(list_images(a.images), transform)) {
        auto dets = detect(det, f, opts);
        for (auto& d : dets) d.rect = {d.rect.u * c, d.rect.v * c, d.rect.m * c, d.rect.n * c};
        const auto it = truth.find(id);
        const std::span<const Rect> truths = it == truth.end() ? std::span<const Rect>{} : std::span(it->second);
        std::vector<bool> matched(dets.size(), false);
        for (auto [d, t] : match_detections(dets, truths, a.match_iou).pairs) matched[d] = true;
        for (std::size_t i = 0; i < dets.size(); ++i) write_detection_csv_row(os, id, dets[i], matched[i]);
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
    std::vector<std::string> sizes{"12x12"}, methods{"chol", "cg", "pcg", "circ"};
    std::vector<double> tols{1e-6};
    std::size_t k = 8, repeats = 1, max_iter = 10000;
    std::string stats, out, history_dir;
    bool synthetic = false;
    double lambda = kDefaultLambda;
    std::uint64_t seed = 0;
};

int cmd_bench(const BenchArgs& a) {
    std::vector<Extent> sizes;
    for (const auto& s : a.sizes) sizes.push_back(parse_extent(s));
    std::vector<Method> methods;
    for (const auto& m : a.methods) methods.push_back(parse_method(m));
    std::size_t dmax_u = 1, dmax_v = 1;
    for (const auto& s : sizes) {
        dmax_u = std::max(dmax_u, s.rows - 1);
        dmax_v = std::max(dmax_v, s.cols - 1);
    }
    const Trainer trainer(a.synthetic ? synthetic::analytic_stats(a.k, dmax_u, dmax_v, a.seed) : load_stats(a.stats));
    const std::size_t k = trainer.stats().channels();

    std::ofstream file;
    if (!a.out.empty()) file = open_output(a.out);
    std::ostream& os = a.out.empty() ? std::cout : file;
    write_bench_header(os);
    if (!a.history_dir.empty()) fs::create_directories(a.history_dir);

    synthetic::Rng rng(a.seed + 1);
    std::normal_distribution<double> n01;
    for (const auto& size : sizes) {
        Template pm(k, size.rows, size.cols);
        for (std::size_t v = 0; v < size.cols; ++v)
            for (std::size_t u = 0; u < size.rows; ++u)
                for (std::size_t p = 0; p < k; ++p) pm.at(p, u, v) = trainer.stats().mu(p) + n01(rng);
        for (Method method : methods)
            for (double tol : a.tols) {
                double lambda = a.lambda;
                for (std::size_t rep = 0; rep < a.repeats; ++rep) {
                    TrainRequest req;
                    req.positive_mean = pm;
                    req.method = method;
                    req.options.tolerance = tol;
                    req.options.max_iterations = a.max_iter;
                    req.toeplitz_diagnostic = false;
                    std::optional<TrainResult> res;
                    for (int attempt = 0; !res; ++attempt) {
                        req.lambda = lambda;
                        try {
                            res = trainer.train(req);
                        } catch (const NumericalError& e) {
                            if (attempt == 5) throw;
                            lambda *= 10.0;
                            std::cerr << "warning: " << e.what() << "; retrying with lambda " << lambda << '\n';
                        }
                    }
                    const auto& r = res->report;
                    write_bench_row(os, {method, k, size.rows, size.cols, lambda, tol, rep, r.iterations,
                                         r.cold_seconds, r.warm_seconds, method_memory_bytes(method, k, size.rows, size.cols),
                                         r.final_residual});
                    if (!a.history_dir.empty() && (method == Method::cg || method == Method::pcg)) {
                        std::ostringstream name;
                        name << to_string(method) << '_' << size.rows << 'x' << size.cols << "_tol" << tol << "_r"
                             << rep << ".csv";
                        auto h = open_output((fs::path(a.history_dir) / name.str()).string());
                        write_residual_csv(h, r);
                    }
                }
            }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stationary LDA detector training with structured covariance solvers"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic texture corpus with planted patterns");
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--negatives", synth.negatives, "Number of negative texture images");
    s->add_option("--positives", synth.positives, "Number of template-sized positives");
    s->add_option("--scenes", synth.scenes, "Number of scenes with one planted pattern");
    s->add_option("--scene-size", synth.scene_size, "Scene and negative extent HxW in pixels");
    s->add_option("--pattern-size", synth.pattern_size, "Pattern extent HxW in pixels");
    s->add_option("--cell", synth.cell, "Planted positions are multiples of this")->check(CLI::PositiveNumber);
    s->add_option("--seed", synth.seed, "Random seed");

    StatsArgs stats;
    auto* st = app.add_subcommand("stats", "Accumulate stationary statistics over a directory of PGM images");
    st->add_option("images", stats.images, "Directory of .pgm images")->required();
    st->add_option("--out", stats.out, "Output STCV file")->required();
    stats.features.add_to(*st);
    st->add_option("--dmax-u", stats.dmax_u, "Largest vertical displacement in feature cells");
    st->add_option("--dmax-v", stats.dmax_v, "Largest horizontal displacement in feature cells");
    st->add_flag("--naive", stats.naive, "Use direct summation instead of the FFT");

    TrainArgs train;
    auto* tr = app.add_subcommand("train", "Train a detector from statistics and positive examples");
    tr->add_option("--stats", train.stats, "STCV statistics file")->required();
    tr->add_option("--positives", train.positives, "Directory of template-sized positive .pgm images")->required();
    tr->add_option("--size", train.size, "Template extent MxN in feature cells")->required();
    tr->add_option("--method", train.method, "Solver")->check(CLI::IsMember({"chol", "cg", "pcg", "circ"}));
    tr->add_option("--lambda", train.lambda, "Ridge regularizer")->check(CLI::NonNegativeNumber);
    tr->add_option("--tol", train.tol, "Relative residual tolerance")->check(CLI::PositiveNumber);
    tr->add_option("--max-iter", train.max_iter, "Iteration cap");
    tr->add_option("--out", train.out, "Output DTEC file")->required();
    tr->add_option("--report", train.report, "Residual history CSV");
    train.features.add_to(*tr);

    DetectArgs det;
    auto* de = app.add_subcommand("detect", "Run a detector over a directory of PGM images");
    de->add_option("--detector", det.detector, "DTEC detector file")->required();
    de->add_option("--images", det.images, "Directory of .pgm images")->required();
    de->add_option("--threshold", det.threshold, "Score threshold (default: the detector's)");
    de->add_option("--nms-iou", det.nms_iou, "Suppress above this IoU");
    de->add_option("--nms-cover", det.nms_cover, "Suppress above this coverage");
    de->add_option("--truth", det.truth, "Ground-truth CSV (image,u,v,m,n) for the matched column");
    de->add_option("--match-iou", det.match_iou, "IoU needed to match a truth");
    de->add_option("--out", det.out, "Detections CSV (default: stdout)");

    BenchArgs bench;
    auto* be = app.add_subcommand("bench", "Time the solvers across template sizes and tolerances");
    be->add_option("--sizes", bench.sizes, "Template extents MxN")->delimiter(',');
    be->add_option("--k", bench.k, "Channels for --synthetic statistics")->check(CLI::PositiveNumber);
    be->add_option("--methods", bench.methods, "Solvers")->delimiter(',');
    be->add_option("--tols", bench.tols, "Tolerances")->delimiter(',');
    be->add_option("--repeats", bench.repeats, "Rows per configuration")->check(CLI::PositiveNumber);
    be->add_option("--max-iter", bench.max_iter, "Iteration cap");
    be->add_option("--lambda", bench.lambda, "Ridge regularizer")->check(CLI::NonNegativeNumber);
    auto* bench_stats = be->add_option("--stats", bench.stats, "STCV statistics file");
    auto* bench_synth = be->add_flag("--synthetic", bench.synthetic, "Use generated analytic statistics");
    bench_stats->excludes(bench_synth);
    be->add_option("--seed", bench.seed, "Random seed");
    be->add_option("--out", bench.out, "Bench CSV (default: stdout)");
    be->add_option("--history-dir", bench.history_dir, "Directory for per-run residual histories");

    try {
        app.parse(argc, argv);
        if (be->parsed() && bench.stats.empty() && !bench.synthetic)
            throw ExitError(kUsageExit, "bench: one of --stats or --synthetic is required");
        if (s->parsed()) return cmd_synth(synth);
        if (st->parsed()) return cmd_stats(stats);
        if (tr->parsed()) return cmd_train(train);
        if (de->parsed()) return cmd_detect(det);
        return cmd_bench(bench);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageExit;
    } catch (const ExitError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
