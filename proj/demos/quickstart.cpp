// Train on a synthetic load series, add a constraint, and print a shape.

#include <cstdio>

#include "igam/igam.hpp"

int main() {
    using namespace igam;
    const SyntheticLoad s = gen_synthetic_load(60, 1);

    TrainConfig cfg = TrainConfig::load_forecasting();
    cfg.rounds = 50;
    const GamModel plain = train(s.data, cfg);
    std::printf("final training MSE: %.3f\n", plain.meta.loss_trace.back());

    // Load should not drop as temperature rises between 0 and 25 C.
    const std::vector<ConstraintSpec> constraints{{2, ConstraintKind::increase, 0.0, 25.0, "c1", 0}};
    const GamModel m = train(s.data, cfg, constraints);

    const ShapeView v = shape_values(m, 2, true, true);
    std::printf("%s shape (centered, intercept %.2f):\n", v.feature.c_str(), m.display_intercept);
    for (std::size_t j = 0; j < v.anchors.size(); j += 16) std::printf("  %8.3f  %9.3f\n", v.anchors[j], v.values[j]);

    const auto pred = predict(m, s.data);
    std::printf("rnmse: %.5f\n", rnmse(s.data.target, pred));
    std::printf("saved model: %zu bytes\n", save_model(m).size());
}
