#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lyap/error.hpp"
#include "lyap/parallel.hpp"
#include "lyap/pipeline.hpp"

using namespace lyap;

int main(int argc, char** argv) {
  CLI::App app{"Lyapunov-spectrum analysis of recurrent network variants"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(tool_version()));

  std::string config_file, preset, output = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool sequential = false;
  auto* cfg = app.add_option("--config", config_file, "experiment config (JSON)");
  auto* pre = app.add_option("--preset", preset, "bundled preset")
                  ->check(CLI::IsMember({"target-learning", "char-rnn", "smnist", "target-learning-full",
                                         "char-rnn-full", "smnist-full"}));
  cfg->excludes(pre);
  app.add_option("--output", output, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--threads", threads, "worker threads (default: LYAP_THREADS or all cores)");
  app.add_flag("--sequential", sequential, "single thread, bit-exact outputs");

  std::string kind_name = "pc1-median";
  double tau = -0.03;
  std::size_t dims = 1;

  app.add_subcommand("gen-variants", "expand the variant grid into the cohort");
  app.add_subcommand("train-variants", "train every variant and checkpoint it");
  app.add_subcommand("compute-le", "Lyapunov spectra of every checkpoint");
  app.add_subcommand("train-ae", "split the cohort and train the spectrum autoencoder");
  app.add_subcommand("embed", "PCA of the autoencoder latents");
  auto* classify = app.add_subcommand("classify", "fit and score one classifier");
  classify->add_option("--kind", kind_name, "classifier kind")
      ->check(CLI::IsMember({"pc1-median", "pc1-fixed", "subspace", "lin-reg", "le-mean-median",
                             "le-max-median", "le-pca-median", "loss-threshold"}))
      ->capture_default_str();
  classify->add_option("--tau", tau, "threshold of pc1-fixed")->capture_default_str();
  classify->add_option("--dims", dims, "PC count of subspace (1, 2, 4, 10)")->capture_default_str();
  app.add_subcommand("compare", "every feature space against every classifier");
  app.add_subcommand("export-plot-data", "CSV of PC coordinates, losses and labels");
  app.add_subcommand("run", "all stages in order");

  CLI11_PARSE(app, argc, argv);

  const CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  try {
    if (config_file.empty() && preset.empty())
      throw ContractError("pass --config FILE or --preset NAME");
    ExperimentConfig config = load_config(config_file.empty() ? preset_path(preset) : std::filesystem::path(config_file));
    if (seed) config.seed = *seed;
    if (config.long_running)
      std::cout << "note: " << (config.name.empty() ? "this config" : config.name)
                << " is a long-running full-scale preset\n";

    RunOptions opts;
    opts.output = output;
    opts.threads = sequential ? 1 : threads.value_or(default_thread_count());
    opts.log = &std::cout;
    Pipeline p(std::move(config), opts);

    if (name == "gen-variants") p.gen_variants();
    else if (name == "train-variants") p.train_variants();
    else if (name == "compute-le") p.compute_le();
    else if (name == "train-ae") p.train_ae();
    else if (name == "embed") p.embed();
    else if (name == "classify") {
      ClassifierSpec spec;
      spec.kind = *parse_classifier_kind(kind_name);
      spec.tau = tau;
      spec.dims = dims;
      if (spec.kind == ClassifierKind::PC1FixedThreshold) spec.orientation = Orientation::BelowIsPositive;
      p.classify(spec);
    } else if (name == "compare") p.compare();
    else if (name == "export-plot-data") p.export_plot_data();
    else if (name == "run") p.run_all();
  } catch (const ContractError& e) {
    std::cerr << "lyapctl " << name << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "lyapctl " << name << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
