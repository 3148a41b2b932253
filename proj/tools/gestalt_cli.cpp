// gestalt_cli -- generate patterns and stimuli, run the detectors, validate
// the false-alarm bound and run experiments from the shell.
//
// Exit status: 0 success, 1 a check failed (validate-h0, scenarios) or an I/O
// error, 2 invalid input.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gestalt/harness.hpp"
#include "gestalt/io.hpp"
#include "gestalt/pipeline.hpp"
#include "gestalt/stimulus.hpp"

namespace {

using namespace gestalt;

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text << std::flush;
  else
    write_text_file(out, text);
}

std::string slurp(const std::string& in) {
  if (in.empty() || in == "-") {
    std::string s((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
    return s;
  }
  return read_text_file(in);
}

bool is_csv(const std::string& path) {
  return path.size() > 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
}

struct Common {
  std::string in;
  std::string out;
  double epsilon = 1.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

void add_common_io(CLI::App* app, Common& c) {
  app->add_option("input,--in", c.in, "Input file ('-' or absent: stdin)");
  app->add_option("-o,--out", c.out, "Output file (default: stdout)");
}

DetectRequest request(const std::string& mode, const std::string& filter, const Common& c, double band,
                      std::optional<double> width) {
  DetectRequest r;
  r.mode = parse_mode(mode);
  r.filter = parse_filter(filter);
  r.epsilon = c.epsilon;
  r.band_factor = band;
  r.width = width;
  r.threads = c.threads;
  validate(r);
  return r;
}

DotPattern load_pattern(const std::string& in, std::optional<double> dw, std::optional<double> dh) {
  if (is_csv(in)) {
    if (!dw || !dh) throw SchemaError("domain", "CSV input needs --domain-width and --domain-height");
    return pattern_from_csv(read_text_file(in), {*dw, *dh});
  }
  return pattern_from_json(parse_json(slurp(in)));
}

GaborField load_field(const std::string& in, std::optional<double> dw, std::optional<double> dh) {
  if (is_csv(in)) {
    if (!dw || !dh) throw SchemaError("domain", "CSV input needs --domain-width and --domain-height");
    return field_from_csv(read_text_file(in), {*dw, *dh});
  }
  return field_from_json(parse_json(slurp(in)));
}

int run(int argc, char** argv) {
  CLI::App app{"Alignment detection in dot patterns and Gabor fields"};
  app.require_subcommand(1);

  Common c;
  std::string mode = "basic", filter = "none", detector = "basic", scene = "noise", kind = "negative";
  double band = 1.0;
  std::optional<double> width, dom_w, dom_h, jitter_opt, seg_length;
  std::string mask_filter = "masking";
  std::size_t n = 100, n_gabor = 200, n_h0 = 100, trials = 200, seeds = 50;
  std::size_t aligned = 7, lines = 1, noise = 20, length = 10, per_cell = 20, negatives = 0;

  // gen-dots
  auto* gen_dots = app.add_subcommand("gen-dots", "Generate a dot pattern");
  gen_dots->add_option("--scene", scene, "noise|planted|clusters|grid|density-step")->capture_default_str();
  gen_dots->add_option("--n", n, "Dots (noise), dots per side (grid)")->capture_default_str();
  gen_dots->add_option("--aligned", aligned, "Planted dots per line")->capture_default_str();
  gen_dots->add_option("--lines", lines, "Planted lines")->capture_default_str();
  gen_dots->add_option("--noise", noise, "Noise dots added to planted/cluster scenes")->capture_default_str();
  gen_dots->add_option("--length", seg_length, "Planted segment length");
  gen_dots->add_option("--seed", c.seed)->capture_default_str();
  gen_dots->add_option("-o,--out", c.out);

  // gen-gabor
  bool dataset = false;
  auto* gen_gabor = app.add_subcommand("gen-gabor", "Generate a Gabor stimulus or a dataset manifest");
  gen_gabor->add_option("--kind", kind, "negative|positive")->capture_default_str();
  gen_gabor->add_option("--n", n_gabor, "Elements")->capture_default_str();
  gen_gabor->add_option("--length", length, "Planted elements")->capture_default_str();
  gen_gabor->add_option("--jitter", jitter_opt, "Orientation jitter interval, radians");
  gen_gabor->add_option("--seed", c.seed)->capture_default_str();
  gen_gabor->add_flag("--dataset", dataset, "Write a manifest: every jitter x length cell plus negatives");
  gen_gabor->add_option("--per-cell", per_cell, "Stimuli per cell (dataset)")->capture_default_str();
  gen_gabor->add_option("--negatives", negatives, "Negative stimuli (dataset)")->capture_default_str();
  gen_gabor->add_option("-o,--out", c.out);

  // detect-dots / mask
  auto* detect_dots_cmd = app.add_subcommand("detect-dots", "Detect alignments in a dot pattern");
  auto* mask = app.add_subcommand("mask", "Detect, filter and report pairwise stability");
  for (auto* sub : {detect_dots_cmd, mask}) {
    add_common_io(sub, c);
    sub->add_option("--mode", mode, "basic|refined")->capture_default_str();
    sub->add_option("--epsilon", c.epsilon)->capture_default_str();
    sub->add_option("--band-factor", band)->capture_default_str();
    sub->add_option("--threads", c.threads, "0: all cores")->capture_default_str();
    sub->add_option("--domain-width", dom_w, "Domain for CSV input");
    sub->add_option("--domain-height", dom_h, "Domain for CSV input");
  }
  detect_dots_cmd->add_option("--filter", filter, "none|exclusion|masking")->capture_default_str();
  mask->add_option("--filter", mask_filter, "exclusion|masking")->capture_default_str();

  // detect-gabor
  auto* detect_gabor_cmd = app.add_subcommand("detect-gabor", "Detect alignments in a Gabor field");
  add_common_io(detect_gabor_cmd, c);
  detect_gabor_cmd->add_option("--filter", filter, "none|exclusion|masking")->capture_default_str();
  detect_gabor_cmd->add_option("--epsilon", c.epsilon)->capture_default_str();
  detect_gabor_cmd->add_option("--width", width, "Rectangle width (default: domain width / sqrt(N))");
  detect_gabor_cmd->add_option("--threads", c.threads)->capture_default_str();
  detect_gabor_cmd->add_option("--domain-width", dom_w);
  detect_gabor_cmd->add_option("--domain-height", dom_h);

  // validate-h0
  auto* h0 = app.add_subcommand("validate-h0", "Monte Carlo check of the false-alarm bound");
  h0->add_option("--detector", detector, "basic|refined|gabor")->capture_default_str();
  h0->add_option("--n", n_h0)->capture_default_str();
  h0->add_option("--trials", trials)->capture_default_str();
  h0->add_option("--epsilon", c.epsilon)->capture_default_str();
  h0->add_option("--seed", c.seed)->capture_default_str();
  h0->add_option("--threads", c.threads)->capture_default_str();

  // experiment
  std::string manifest, out_dir = ".";
  auto* experiment = app.add_subcommand("experiment", "Run the Gabor detector over a dataset");
  experiment->add_option("--manifest", manifest, "Manifest (one stimulus per line); generated when absent");
  experiment->add_option("--per-cell", per_cell)->capture_default_str();
  experiment->add_option("--negatives", negatives)->capture_default_str();
  experiment->add_option("--seed", c.seed)->capture_default_str();
  experiment->add_option("--epsilon", c.epsilon)->capture_default_str();
  experiment->add_option("--width", width);
  experiment->add_option("--threads", c.threads)->capture_default_str();
  experiment->add_option("--out-dir", out_dir)->capture_default_str();

  // scenarios
  auto* scenarios = app.add_subcommand("scenarios", "Run the reference scenarios");
  scenarios->add_option("--trials", seeds, "Seeds per scenario")->capture_default_str();
  scenarios->add_option("--seed", c.seed)->capture_default_str();
  scenarios->add_option("--threads", c.threads)->capture_default_str();
  scenarios->add_option("-o,--out", c.out, "JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (gen_dots->parsed()) {
    DotSceneRecipe recipe;
    if (scene == "noise") {
      recipe = NoiseScene{n, kDotDomain, c.seed};
    } else if (scene == "planted") {
      recipe = PlantedScene{aligned, noise, seg_length.value_or(200.0), lines, kDotDomain, c.seed};
    } else if (scene == "clusters") {
      ClusterScene s = cluster_scene(c.seed);
      s.noise = noise;
      recipe = s;
    } else if (scene == "grid") {
      recipe = GridScene{n, n, 40.0};
    } else if (scene == "density-step") {
      recipe = density_step_scene(c.seed);
    } else {
      throw SchemaError("--scene", "unknown scene '" + scene + "'");
    }
    emit(c.out, dump(to_json(gen_dot_scene(recipe))));
    return 0;
  }

  if (gen_gabor->parsed()) {
    if (dataset) {
      const auto specs = dataset_design(per_cell, negatives, c.seed, n_gabor);
      std::string text;
      for (const auto& s : specs) text += dump(to_json(generate(s)));
      emit(c.out, text);
      return 0;
    }
    StimulusSpec s;
    if (kind == "positive")
      s.kind = StimulusKind::positive;
    else if (kind != "negative")
      throw SchemaError("--kind", "expected negative or positive");
    s.n = n_gabor;
    s.length = length;
    s.jitter = jitter_opt.value_or(0.0);
    s.seed = c.seed;
    emit(c.out, dump(to_json(generate(s))));
    return 0;
  }

  if (detect_dots_cmd->parsed()) {
    const DotPattern p = load_pattern(c.in, dom_w, dom_h);
    emit(c.out, dump(detect_document(p, request(mode, filter, c, band, std::nullopt))));
    return 0;
  }

  if (mask->parsed()) {
    const DotPattern p = load_pattern(c.in, dom_w, dom_h);
    const DetectRequest r = request(mode, mask_filter, c, band, std::nullopt);
    if (r.filter == FilterKind::none) throw SchemaError("--filter", "mask needs exclusion or masking");
    const DotDetectConfig cfg = r.dot_config();
    const auto raw = detect_dots(p, r.mode, cfg);
    const auto kept = apply_filter(p, raw, cfg, r.filter);
    const auto violations = masking_violations(as_candidates(p, kept, cfg), cfg.epsilon);
    std::cerr << "raw=" << raw.size() << " accepted=" << kept.size() << " violations=" << violations.size() << "\n";
    emit(c.out, dump(detections_to_json(p, kept)));
    return 0;
  }

  if (detect_gabor_cmd->parsed()) {
    const GaborField f = load_field(c.in, dom_w, dom_h);
    emit(c.out, dump(detect_document(f, request("basic", filter, c, 1.0, width))));
    return 0;
  }

  if (h0->parsed()) {
    H0Config cfg{parse_detector(detector), n_h0, trials, c.epsilon, c.seed, c.threads};
    const H0Report rep = h0_montecarlo(cfg);
    std::cout << summary_line(rep) << "\n";
    return rep.pass ? 0 : 1;
  }

  if (experiment->parsed()) {
    std::vector<StimulusRecord> records;
    std::size_t skipped = 0;
    if (!manifest.empty()) {
      ManifestLoad load = load_manifest(read_text_file(manifest));
      for (const auto& [line, why] : load.skipped) std::cerr << manifest << ":" << line << ": skipped: " << why << "\n";
      skipped = load.skipped.size();
      records = std::move(load.records);
    } else {
      for (const auto& s : dataset_design(per_cell, negatives, c.seed)) records.push_back(generate(s));
    }
    GaborDetectConfig gc;
    gc.epsilon = c.epsilon;
    gc.width = width;
    DatasetReport rep = run_dataset(records, gc, c.threads);
    rep.skipped = skipped;
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    write_text_file((dir / "trials.csv").string(), trials_csv(rep.trials));
    write_text_file((dir / "curve.csv").string(), curve_csv(rep.curve));
    write_text_file((dir / "rates.csv").string(), rates_csv(rep.cells));
    write_text_file((dir / "report.json").string(), dump(to_json(rep)));
    std::cout << "trials=" << rep.trials.size() << " skipped=" << skipped
              << " trend_violations=" << trend_violations(rep).size() << " false_alarm_rate="
              << format_sig12(rep.false_alarms.rate) << "\n";
    return 0;
  }

  if (scenarios->parsed()) {
    const auto checks = scenario_suite({seeds, c.seed, c.threads});
    bool ok = true;
    for (const auto& chk : checks) {
      std::cout << (chk.pass ? "PASS " : "FAIL ") << chk.name << ": " << chk.detail << "\n";
      ok = ok && chk.pass;
    }
    if (!c.out.empty()) write_text_file(c.out, dump(to_json(checks)));
    return ok ? 0 : 1;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const gestalt::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
