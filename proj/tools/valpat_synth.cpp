// Synthetic pedestrian-card dataset generator for demos and tests.
#include <CLI11.hpp>

#include <iostream>

#include "valpat/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic pedestrian-card dataset"};

  valpat::SyntheticOptions options;
  std::string out_dir;
  app.add_option("--out", out_dir, "Output directory (must exist)")->required();
  app.add_option("--n", options.num_cards, "Number of distinct cards");
  app.add_option("--height", options.height, "Card height in pixels");
  app.add_option("--width", options.width, "Card width in pixels");
  app.add_option("--views", options.views_per_card, "Camera views per card");
  app.add_option("--seed", options.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n' << app.help() << '\n';
    return 2;
  }

  try {
    const auto data = valpat::make_pedestrian_cards(options);
    const std::string manifest = valpat::write_synthetic_dataset(out_dir, data);
    std::cout << manifest << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
