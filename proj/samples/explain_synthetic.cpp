// Library walkthrough: build a three-regime dataset, explain its black box
// and print the subgroups, the loss curve and the elbow.
//
//   sample_explain [spec.json] [K]

#include "sd4x/sd4x.hpp"

#include <iostream>

int main(int argc, char** argv) {
  using namespace sd4x;
  try {
    const std::string spec_path = argc > 1 ? argv[1] : "samples/three_regimes.json";
    const std::size_t K = argc > 2 ? static_cast<std::size_t>(std::stoul(argv[2])) : 8;

    const auto synth = generate_synthetic(synth_spec_from_json(read_json_file(spec_path)), 1);
    const Dataset& data = synth.dataset;

    SplitterConfig cfg;
    cfg.K = K;
    cfg.lambda = 0.0;
    // Tight neighborhoods (large z) keep samples on their own side of the regime cuts.
    const auto ex = explain(data, *synth.oracle, NeighborhoodParams{1e5, 50, 1}, cfg);
    const auto& part = ex.partition;

    for (const auto& s : part.subgroups) {
      std::cout << "subgroup " << s.id << " (" << s.members.size() << " objects): "
                << render_closed(s.pattern, data, s.members) << "\n";
      const auto imp = feature_importance(s.model, 0);
      for (std::size_t i = 0; i < imp.features.size() && i < 3; ++i)
        std::cout << "    " << ex.encoded.columns[imp.features[i].column].name << " "
                  << (imp.features[i].coefficient >= 0 ? "+" : "-") << format_number(imp.features[i].ratio) << "\n";
    }

    const auto curve = loss_curve(part, K);
    std::cout << "\nK  loss\n";
    for (const auto& p : curve) std::cout << p.K << "  " << format_number(p.loss) << "\n";
    if (const auto k = elbow(curve)) std::cout << "elbow at K = " << *k << "\n";
    std::cout << "MSE " << format_number(mse(part, ex.neighborhoods)) << ", global-wb "
              << format_number(mse(fit_global_wb(ex.neighborhoods, {0.0, true, false}), ex.neighborhoods)) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
