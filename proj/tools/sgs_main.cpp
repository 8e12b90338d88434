#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sgs/demo.hpp"
#include "sgs/flops.hpp"
#include "sgs/gradcheck.hpp"
#include "sgs/io.hpp"
#include "sgs/sampler.hpp"
#include "sgs/synthetic.hpp"
#include "sgs/toy_model.hpp"

namespace {

// Exit codes: 0 success, 1 check/numeric failure, 2 usage or configuration
// error, 3 I/O error.
constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("SGS_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw sgs::ConfigError("SGS_SEED must be an unsigned integer");
    }
  }
  return 42;
}

int run_gradcheck(std::uint64_t seed, double tol, const std::string& cases_path) {
  const std::vector<sgs::GradCase> cases = cases_path.empty()
                                               ? sgs::default_gradcheck_cases(seed)
                                               : sgs::load_gradcheck_cases(cases_path, seed);
  const sgs::GradSuiteResult suite = sgs::run_grad_suite(cases, tol);
  for (const sgs::GradCaseResult& r : suite.cases) {
    std::cout << (r.pass ? "PASS" : "FAIL") << ' ' << r.name
              << " max_rel_err=" << sgs::format_double(r.max_rel_err) << '\n';
  }
  std::size_t failures = 0;
  for (const sgs::GradCaseResult& r : suite.cases) {
    if (!r.pass) ++failures;
  }
  std::cout << "gradcheck: " << suite.cases.size() - failures << '/' << suite.cases.size()
            << " cases passed (tol=" << sgs::format_double(tol) << ")\n";
  return suite.all_pass ? kExitOk : kExitCheckFailure;
}

int run_demo_cmd(const sgs::DemoConfig& config, const std::string& out_dir) {
  const sgs::DemoResult result = sgs::run_demo(config);
  sgs::write_demo_reports(result, out_dir);
  std::cout << "demo: clips=" << result.clips.size()
            << " mean_bprime=" << sgs::format_double(result.mean_bprime) << " reports in "
            << out_dir << '\n';
  return kExitOk;
}

int run_train_toy(const std::string& config_path, const std::string& out_dir) {
  const sgs::ToyModelConfig config = sgs::load_toy_config(config_path);
  const sgs::TrainReport report = sgs::train_toy(config);
  sgs::write_train_reports(report, config, out_dir);
  std::cout << "train-toy: epochs=" << report.curve.size()
            << " final_accuracy=" << sgs::format_double(report.final_accuracy)
            << " final_loss=" << sgs::format_double(report.curve.back().loss) << " reports in "
            << out_dir << '\n';
  return kExitOk;
}

std::vector<std::pair<std::string, std::size_t>> load_bprime_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sgs::IoError("cannot open B' table '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw sgs::ConfigError("B' table '" + path + "' is empty");

  const auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(s);
    while (std::getline(is, field, ',')) out.push_back(field);
    return out;
  };

  const std::vector<std::string> header = split(line);
  std::size_t clip_col = header.size(), bprime_col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "clip") clip_col = i;
    if (header[i] == "bprime") bprime_col = i;
  }
  if (clip_col == header.size() || bprime_col == header.size()) {
    throw sgs::ConfigError("B' table '" + path + "' needs 'clip' and 'bprime' columns");
  }

  std::vector<std::pair<std::string, std::size_t>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split(line);
    if (fields.size() != header.size()) {
      std::ostringstream msg;
      msg << "B' table '" << path << "' line " << line_no << ": wrong field count";
      throw sgs::ConfigError(msg.str());
    }
    std::size_t bprime = 0;
    try {
      bprime = std::stoul(fields[bprime_col]);
    } catch (const std::exception&) {
      std::ostringstream msg;
      msg << "B' table '" << path << "' line " << line_no << ": bad bprime value";
      throw sgs::ConfigError(msg.str());
    }
    rows.emplace_back(fields[clip_col], bprime);
  }
  if (rows.empty()) throw sgs::ConfigError("B' table '" + path + "' holds no rows");
  return rows;
}

int run_flops(const std::string& stack_path, const std::string& bprime_path, std::size_t t_full,
              std::size_t h0, std::size_t w0, const std::string& out_path) {
  const std::vector<sgs::LayerSpec> stack = sgs::load_stack(stack_path);
  const auto rows = load_bprime_csv(bprime_path);
  const sgs::FlopReport rep = sgs::report(rows, stack, t_full, h0, w0);

  nlohmann::json doc;
  doc["convention"] = "1 multiply-accumulate = 2 FLOPs; pooling, activations and biases cost 0";
  doc["t_full"] = t_full;
  doc["input_spatial"] = {h0, w0};
  doc["baseline_flops"] = rep.baseline_flops;
  doc["average_flops"] = rep.average_flops;
  doc["reduction_fraction"] = rep.reduction_fraction;
  nlohmann::json clips = nlohmann::json::array();
  for (const sgs::ClipFlops& c : rep.per_clip) {
    clips.push_back({{"clip", c.clip}, {"bprime", c.bprime}, {"flops", c.flops}});
  }
  doc["per_clip"] = clips;
  sgs::write_text_file(out_path, doc.dump(2) + "\n");

  std::cout << "flops: baseline=" << sgs::format_double(rep.baseline_flops)
            << " average=" << sgs::format_double(rep.average_flops)
            << " reduction_fraction=" << sgs::format_double(rep.reduction_fraction)
            << " report in " << out_path << '\n';
  return kExitOk;
}

int run_bins(const std::string& input_path, const std::vector<std::string>& param_paths,
             std::size_t bins, sgs::KernelKind kernel, sgs::BinMode mode,
             const std::string& out_path) {
  const sgs::FeatureSequence seq(sgs::read_sgt(input_path));
  if (param_paths.size() != 4) {
    throw sgs::ConfigError("--params needs exactly four tensors: w1 b1 w2 b2");
  }
  sgs::SimilarityParams params;
  params.w1 = sgs::read_sgt(param_paths[0]);
  params.b1 = sgs::read_sgt(param_paths[1]);
  params.w2 = sgs::read_sgt(param_paths[2]);
  params.b2 = sgs::read_sgt(param_paths[3]);
  params.validate();

  const sgs::SimilarityVectors z = sgs::embed_forward(seq, params);
  const sgs::MagnitudeTrack delta = sgs::magnitudes(z);
  const sgs::BinGeometry geom = sgs::make_geometry(delta, bins, mode);
  const sgs::SampledSequence sampled = sgs::sample_forward(seq, delta, geom, kernel);

  std::ostringstream csv;
  csv << "# kernel," << sgs::kernel_name(kernel) << '\n';
  csv << "# mode," << sgs::bin_mode_name(geom.mode) << '\n';
  csv << "# gamma," << sgs::format_double(geom.gamma) << '\n';
  csv << "# centers,";
  for (std::size_t b = 0; b < geom.centers.size(); ++b) {
    if (b) csv << ';';
    csv << sgs::format_double(geom.centers[b]);
  }
  csv << '\n';
  csv << "# bprime," << sampled.bin_prime() << '\n';
  csv << "# pooled_fallback," << (sampled.assignment.pooled_fallback ? "true" : "false") << '\n';
  csv << "t,delta,bin,weight\n";
  for (std::size_t t = 0; t < seq.t(); ++t) {
    long bin = -1;
    double weight = 0.0;
    for (const sgs::WeightEntry& e : sampled.assignment.entries) {
      if (e.frame == t) {
        bin = static_cast<long>(e.bin);
        weight = e.weight;
        break;
      }
    }
    csv << t << ',' << sgs::format_double(delta.delta[t]) << ',' << bin << ','
        << sgs::format_double(weight) << '\n';
  }
  sgs::write_text_file(out_path, csv.str());
  std::cout << "bins: bprime=" << sampled.bin_prime() << " table in " << out_path << '\n';
  return kExitOk;
}

int run_gen_clip(const sgs::SyntheticSpec& spec, const std::string& out_path) {
  const sgs::FeatureSequence seq = sgs::gen_clip(spec);
  sgs::write_sgt(out_path, seq.frames());
  std::cout << "gen-clip: wrote " << out_path << '\n';
  return kExitOk;
}

int run_gen_params(std::size_t channels, std::size_t embed_dim, std::uint64_t seed,
                   const std::string& prefix) {
  sgs::SeededRng rng(seed);
  const sgs::SimilarityParams params = sgs::SimilarityParams::init(channels, embed_dim, rng);
  sgs::write_sgt(prefix + ".w1.sgt", params.w1);
  sgs::write_sgt(prefix + ".b1.sgt", params.b1);
  sgs::write_sgt(prefix + ".w2.sgt", params.w2);
  sgs::write_sgt(prefix + ".b2.sgt", params.b2);
  std::cout << "gen-params: wrote " << prefix << ".{w1,b1,w2,b2}.sgt\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"similarity guided sampling toolbox"};
  app.require_subcommand(1);
  // --h is a real option on some subcommands, so help is --help only.
  app.set_help_flag("--help", "print help");

  try {
    const std::uint64_t seed0 = default_seed();

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "run the gradient comparison suite");
    gradcheck->set_help_flag("--help", "print help");
    std::uint64_t gc_seed = seed0;
    double gc_tol = 1e-5;
    std::string gc_cases;
    gradcheck->add_option("--seed", gc_seed, "suite seed")->capture_default_str();
    gradcheck->add_option("--tol", gc_tol, "max relative error")->capture_default_str();
    gradcheck->add_option("--cases", gc_cases, "JSON case list (default: built-in suite)");

    // demo
    auto* demo = app.add_subcommand("demo", "bin-count histogram over a synthetic corpus");
    demo->set_help_flag("--help", "print help");
    sgs::DemoConfig dc;
    dc.seed = seed0;
    std::string demo_regime, demo_kernel = "linear", demo_mode = "strict",
                             demo_measure = "magnitude", demo_out;
    std::vector<std::size_t> demo_bpc;
    demo->add_option("--regime", demo_regime, "redundant|diverse|drifting|mixed")->required();
    demo->add_option("--clips", dc.clips, "corpus size")->capture_default_str();
    demo->add_option("--t", dc.t, "frames per clip")->capture_default_str();
    demo->add_option("--c", dc.c, "channels")->capture_default_str();
    demo->add_option("--h", dc.h, "height")->capture_default_str();
    demo->add_option("--w", dc.w, "width")->capture_default_str();
    demo->add_option("--bins", dc.sgs.bins, "bin count B")->required();
    demo->add_option("--kernel", demo_kernel, "linear|kronecker")->capture_default_str();
    demo->add_option("--mode", demo_mode, "strict|centered")->capture_default_str();
    demo->add_option("--measure", demo_measure, "magnitude|angular|spherical")
        ->capture_default_str();
    demo->add_option("--out", demo_out, "report directory")->required();
    demo->add_option("--embed-dim", dc.embed_dim, "similarity dimension L")
        ->capture_default_str();
    demo->add_option("--sigma", dc.sigma, "redundant-regime noise level")->capture_default_str();
    demo->add_option("--seed", dc.seed, "corpus seed")->capture_default_str();
    demo->add_option("--bins-per-coord", demo_bpc,
                     "per-coordinate bin counts for angular/spherical");
    bool demo_normalize = false;
    demo->add_flag("--normalize", demo_normalize, "divide linear-kernel bins by weight sum");

    // train-toy
    auto* train = app.add_subcommand("train-toy", "train the desk-scale classifier");
    train->set_help_flag("--help", "print help");
    std::string train_config, train_out;
    train->add_option("--config", train_config, "JSON config path")->required();
    train->add_option("--out", train_out, "report directory")->required();

    // flops
    auto* flops = app.add_subcommand("flops", "cost model over a B' table");
    flops->set_help_flag("--help", "print help");
    std::string fl_stack, fl_bprime, fl_out;
    std::size_t fl_tfull = 0, fl_h = 14, fl_w = 14;
    flops->add_option("--stack", fl_stack, "layer stack file")->required();
    flops->add_option("--bprime-csv", fl_bprime, "CSV with clip,bprime columns")->required();
    flops->add_option("--t-full", fl_tfull, "baseline temporal length")->required();
    flops->add_option("--out", fl_out, "JSON report path")->required();
    flops->add_option("--h", fl_h, "input height")->capture_default_str();
    flops->add_option("--w", fl_w, "input width")->capture_default_str();

    // bins
    auto* bins = app.add_subcommand("bins", "dump bin geometry and assignment for a clip");
    bins->set_help_flag("--help", "print help");
    std::string bins_input, bins_out, bins_kernel = "linear", bins_mode = "strict";
    std::vector<std::string> bins_params;
    std::size_t bins_b = 0;
    bins->add_option("--input", bins_input, "clip tensor (T x C x H x W, SGT1)")->required();
    bins->add_option("--params", bins_params, "embedding tensors: w1 b1 w2 b2")
        ->required()
        ->expected(4);
    bins->add_option("--bins", bins_b, "bin count B")->required();
    bins->add_option("--out", bins_out, "CSV path")->required();
    bins->add_option("--kernel", bins_kernel, "linear|kronecker")->capture_default_str();
    bins->add_option("--mode", bins_mode, "strict|centered")->capture_default_str();

    // gen-clip
    auto* gen_clip = app.add_subcommand("gen-clip", "write a synthetic clip as SGT1");
    gen_clip->set_help_flag("--help", "print help");
    sgs::SyntheticSpec gen_spec;
    gen_spec.t = 16;
    gen_spec.c = 8;
    gen_spec.h = 8;
    gen_spec.w = 8;
    gen_spec.seed = seed0;
    std::string gen_regime = "diverse", gen_out;
    gen_clip->add_option("--t", gen_spec.t, "frames")->capture_default_str();
    gen_clip->add_option("--c", gen_spec.c, "channels")->capture_default_str();
    gen_clip->add_option("--h", gen_spec.h, "height")->capture_default_str();
    gen_clip->add_option("--w", gen_spec.w, "width")->capture_default_str();
    gen_clip->add_option("--regime", gen_regime, "redundant|diverse|drifting")
        ->capture_default_str();
    gen_clip->add_option("--sigma", gen_spec.sigma, "redundant noise level")
        ->capture_default_str();
    gen_clip->add_option("--seed", gen_spec.seed, "clip seed")->capture_default_str();
    gen_clip->add_option("--out", gen_out, "output SGT1 path")->required();

    // gen-params
    auto* gen_params = app.add_subcommand("gen-params", "write seeded embedding tensors");
    gen_params->set_help_flag("--help", "print help");
    std::size_t gp_c = 8, gp_l = 4;
    std::uint64_t gp_seed = seed0;
    std::string gp_prefix;
    gen_params->add_option("--c", gp_c, "channels")->capture_default_str();
    gen_params->add_option("--l", gp_l, "similarity dimension")->capture_default_str();
    gen_params->add_option("--seed", gp_seed, "parameter seed")->capture_default_str();
    gen_params->add_option("--out-prefix", gp_prefix, "output path prefix")->required();

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? kExitOk : kExitConfig;
    }

    if (*gradcheck) return run_gradcheck(gc_seed, gc_tol, gc_cases);
    if (*demo) {
      dc.regime = sgs::parse_corpus_regime(demo_regime);
      dc.sgs.kernel = sgs::parse_kernel(demo_kernel);
      dc.sgs.mode = sgs::parse_bin_mode(demo_mode);
      dc.sgs.measure = sgs::parse_measure(demo_measure);
      dc.sgs.bins_per_coord = demo_bpc;
      dc.sgs.normalize = demo_normalize;
      return run_demo_cmd(dc, demo_out);
    }
    if (*train) return run_train_toy(train_config, train_out);
    if (*flops) return run_flops(fl_stack, fl_bprime, fl_tfull, fl_h, fl_w, fl_out);
    if (*bins) {
      return run_bins(bins_input, bins_params, bins_b, sgs::parse_kernel(bins_kernel),
                      sgs::parse_bin_mode(bins_mode), bins_out);
    }
    if (*gen_clip) {
      gen_spec.regime = sgs::parse_regime(gen_regime);
      return run_gen_clip(gen_spec, gen_out);
    }
    if (*gen_params) return run_gen_params(gp_c, gp_l, gp_seed, gp_prefix);
    return kExitConfig;
  } catch (const sgs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const sgs::ShapeError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const sgs::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const sgs::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitCheckFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCheckFailure;
  }
}
