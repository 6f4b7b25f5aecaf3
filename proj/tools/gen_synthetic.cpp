// casf-synth: writes a synthetic annotated corpus as JSONL.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "casf/dataset.hpp"
#include "casf/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic evaluation corpus with latent sample quality"};
  casf::SyntheticParams p;
  std::uint64_t seed = 1;
  std::string out, latent = "uniform";
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--out", out, "output JSONL (stdout when omitted)");
  app.add_option("--samples", p.samples, "number of samples");
  app.add_option("--systems", p.systems, "number of systems");
  app.add_option("--aspects", p.aspects, "number of aspects");
  app.add_option("--human-noise", p.human_noise, "sd of annotation noise");
  app.add_option("--metric-noise", p.metric_noise, "sd of noise on output fidelity");
  app.add_option("--latent", latent, "latent quality shape")->check(CLI::IsMember({"uniform", "gaussian"}));
  CLI11_PARSE(app, argc, argv);
  p.latent = latent == "gaussian" ? casf::LatentShape::gaussian : casf::LatentShape::uniform;
  try {
    const std::string jsonl = casf::serialize_dataset(casf::make_synthetic(p, seed));
    if (out.empty()) {
      std::cout << jsonl;
    } else {
      std::ofstream f(out, std::ios::binary);
      if (!(f << jsonl)) throw casf::Error("cannot write '" + out + "'");
    }
  } catch (const std::exception& e) {
    std::cerr << "casf-synth: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
