// Trains a detector on synthetic textures with every solver and runs it on a
// scene with one planted pattern.

#include <cstdio>
#include <vector>

#include <slda/slda.hpp>
#include <slda/synthetic.hpp>

int main() {
    using namespace slda;
    constexpr std::size_t cell = 4, bins = 8, pattern_px = 48, m = pattern_px / cell, n = pattern_px / cell;
    synthetic::Rng rng(42);

    // Negative statistics are gathered once and reused for any template size.
    StationaryAccumulator acc(bins, m - 1, n - 1);
    for (int i = 0; i < 200; ++i) accumulate_image_fft(acc, hoglite_transform(synthetic::texture(128, 128, rng), cell, bins));
    const Trainer trainer(finalize(acc));
    std::printf("statistics: %llu images, fingerprint %s\n", static_cast<unsigned long long>(trainer.stats().image_count),
                trainer.stats_fingerprint().c_str());

    const auto pattern = synthetic::pattern(pattern_px, pattern_px);
    std::vector<FeatureImage> positives;
    for (int i = 0; i < 30; ++i) positives.push_back(hoglite_transform(synthetic::positive_example(pattern, rng), cell, bins));

    Raster scene = synthetic::texture(128, 160, rng);
    synthetic::plant(scene, pattern, 40, 72);
    const FeatureImage features = hoglite_transform(scene, cell, bins);

    TrainRequest req;
    req.positive_mean = positive_mean(positives, m, n);
    req.lambda = 0.1;
    for (Method method : {Method::cholesky, Method::cg, Method::pcg, Method::circulant}) {
        req.method = method;
        TrainResult r;
        try {
            r = trainer.train(req);
        } catch (const Error& e) {
            std::fprintf(stderr, "%s\n", e.what());
            return 1;
        }
        DetectOptions opts;
        opts.threshold = 0.0;
        const auto dets = detect(r.detector, features, opts);
        std::printf("%-5s iterations %4zu  residual %.1e  cold %.4fs  warm %.4fs  top detection at pixel (%ld, %ld)\n",
                    std::string(to_string(method)).c_str(), r.report.iterations, r.report.final_residual,
                    r.report.cold_seconds, r.report.warm_seconds, dets.empty() ? -1L : dets[0].rect.u * long(cell),
                    dets.empty() ? -1L : dets[0].rect.v * long(cell));
    }
    std::printf("planted at pixel (40, 72)\n");
}
