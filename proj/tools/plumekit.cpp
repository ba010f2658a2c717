#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <plumekit/plumekit.hpp>

namespace {

using namespace plumekit;

// stdout carries machine-readable results only; everything else goes to
// stderr. Exit codes: 0 success, 2 usage or malformed input, 3 numeric or
// runtime failure.

struct CommonSift {
  double sd_threshold = 1e-3;
  int max_inner_iters = 200;
  int max_imfs = 16;
  std::string support = "ellipsoidal";

  SiftParams to_params() const {
    SiftParams p;
    p.sd_threshold = sd_threshold;
    p.max_inner_iters = max_inner_iters;
    p.max_imfs = max_imfs;
    if (support == "ellipsoidal")
      p.support_shape = SupportShape::ellipsoidal;
    else if (support == "spherical")
      p.support_shape = SupportShape::spherical;
    else
      fail(ErrorCode::unparseable_value, "unknown support shape '" + support + "'");
    return p;
  }
};

void add_sift_options(CLI::App* cmd, CommonSift& sift) {
  cmd->add_option("--sd", sift.sd_threshold, "sifting stop threshold");
  cmd->add_option("--max-inner-iters", sift.max_inner_iters, "sifting iteration cap");
  cmd->add_option("--max-imfs", sift.max_imfs, "decomposition depth cap");
  cmd->add_option("--support", sift.support, "support shape: ellipsoidal|spherical");
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// decompose

struct DecomposeArgs {
  std::string input;
  int dims = 0;
  std::string out_prefix;
  bool verify = false;
  CommonSift sift;
  int threads = 0;
};

int cmd_decompose(const DecomposeArgs& args) {
  SiftParams params = args.sift.to_params();
  std::string manifest = "# plumekit decompose manifest\n";
  manifest += "input=" + args.input + "\n";
  manifest += "dims=" + std::to_string(args.dims) + "\n";

  if (args.dims == 1) {
    Signature signal = read_signature(args.input);
    ImfStack1d stack = if_decompose_1d(signal.values, params);
    manifest += "length=" + std::to_string(signal.values.size()) + "\n";
    manifest += "imfs=" + std::to_string(stack.imfs.size()) + "\n";
    for (std::size_t k = 0; k < stack.imfs.size(); ++k) {
      std::string file = args.out_prefix + "imf_" + std::to_string(k + 1) + ".csv";
      write_signature(Signature(stack.imfs[k]), file);
      manifest += "imf=" + std::to_string(k + 1) + " file=" + file +
                  " half_len=" + std::to_string(stack.info[k].half_len) +
                  " iterations=" + std::to_string(stack.info[k].iterations) + "\n";
    }
    std::string rfile = args.out_prefix + "residual.csv";
    write_signature(Signature(stack.residual), rfile);
    manifest += "residual file=" + rfile + "\n";
    detail::write_all_bytes(args.out_prefix + "manifest.txt", manifest, "decompose");

    if (args.verify) {
      std::vector<double> sum = read_signature(rfile).values;
      for (std::size_t k = 0; k < stack.imfs.size(); ++k) {
        Signature imf =
            read_signature(args.out_prefix + "imf_" + std::to_string(k + 1) + ".csv");
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += imf.values[i];
      }
      double linf = 0.0, err = 0.0;
      for (std::size_t i = 0; i < sum.size(); ++i) {
        linf = std::max(linf, std::abs(signal.values[i]));
        err = std::max(err, std::abs(sum[i] - signal.values[i]));
      }
      double tol = 1e-5 * linf + 1e-12;
      if (err > tol)
        fail(ErrorCode::non_finite_value,
             "decompose --verify: reconstruction error " + format_g17(err) +
                 " exceeds " + format_g17(tol));
      std::cerr << "verify: ok, max reconstruction error " << format_g17(err) << "\n";
    }
  } else {
    DetectionMap image = read_detection_map(args.input);
    ImfStack2d stack = mif_decompose_2d(image, params, args.threads);
    manifest += "rows=" + std::to_string(image.height) + "\n";
    manifest += "cols=" + std::to_string(image.width) + "\n";
    manifest += "imfs=" + std::to_string(stack.imfs.size()) + "\n";
    for (std::size_t k = 0; k < stack.imfs.size(); ++k) {
      std::string file = args.out_prefix + "imf_" + std::to_string(k + 1) + ".dmp";
      write_detection_map(stack.imfs[k], file);
      manifest += "imf=" + std::to_string(k + 1) + " file=" + file +
                  " half_rows=" + std::to_string(stack.info[k].half_rows) +
                  " half_cols=" + std::to_string(stack.info[k].half_cols) +
                  " iterations=" + std::to_string(stack.info[k].iterations) + "\n";
    }
    std::string rfile = args.out_prefix + "residual.dmp";
    write_detection_map(stack.residual, rfile);
    manifest += "residual file=" + rfile + "\n";
    detail::write_all_bytes(args.out_prefix + "manifest.txt", manifest, "decompose");

    if (args.verify) {
      DetectionMap sum = read_detection_map(rfile);
      for (std::size_t k = 0; k < stack.imfs.size(); ++k) {
        DetectionMap imf =
            read_detection_map(args.out_prefix + "imf_" + std::to_string(k + 1) + ".dmp");
        for (std::size_t i = 0; i < sum.scores.size(); ++i)
          sum.scores[i] += imf.scores[i];
      }
      double linf = 0.0, err = 0.0;
      for (std::size_t i = 0; i < sum.scores.size(); ++i) {
        linf = std::max(linf, std::abs(image.scores[i]));
        err = std::max(err, std::abs(sum.scores[i] - image.scores[i]));
      }
      double tol = 1e-5 * linf + 1e-12;
      if (err > tol)
        fail(ErrorCode::non_finite_value,
             "decompose --verify: reconstruction error " + format_g17(err) +
                 " exceeds " + format_g17(tol));
      std::cerr << "verify: ok, max reconstruction error " << format_g17(err) << "\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// classify

struct ClassifyArgs {
  std::string cube_path, sig_path, mask_path, out_path;
  std::string method = "ace";
  std::string format = "dmp1";
  bool use_prep = false, use_postp = false, reverse = false;
  CommonSift sift;
  int threads = 0;
};

int cmd_classify(const ClassifyArgs& args) {
  auto start = std::chrono::steady_clock::now();
  Hypercube cube = read_hypercube(args.cube_path);
  Signature sc = read_signature(args.sig_path);
  GroundTruthMask mask;
  PipelineConfig cfg;
  cfg.method = method_from_name(args.method);
  cfg.use_prep = args.use_prep;
  cfg.use_postp = args.use_postp;
  cfg.reverse = args.reverse;
  cfg.sift = args.sift.to_params();
  cfg.threads = args.threads;
  if (!args.mask_path.empty()) {
    mask = read_mask(args.mask_path);
    cfg.stats_mask = &mask;
  }
  PipelineResult result = run_pipeline(cube, sc, cfg);
  write_detection_map(result.map, args.out_path, map_format_from_name(args.format));
  double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << "classify: degenerate_pixels=" << result.report.degenerate_pixels
            << " prep=" << result.report.prep_seconds
            << "s classify=" << result.report.classify_seconds
            << "s postp=" << result.report.postp_seconds << "s total=" << total
            << "s\n";
  return 0;
}

// ---------------------------------------------------------------------------
// roc

struct RocArgs {
  std::string scores_path, gt_path, out_path;
  bool log_x = false;
};

int cmd_roc(const RocArgs& args) {
  DetectionMap map = read_detection_map(args.scores_path);
  GroundTruthMask mask = read_mask(args.gt_path);
  RocCurve curve = compute_roc(map, mask);
  if (!args.out_path.empty()) roc_to_csv(curve, args.out_path, args.log_x);
  std::cout << "AUC=" << format_g17(curve.auc) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string spec_path, sig_path, out_cube, out_mask;
};

int cmd_synth(const SynthArgs& args) {
  SceneSpec spec = read_scene_spec(args.spec_path);
  Signature sc = read_signature(args.sig_path);
  auto [cube, mask] = generate_scene(spec, sc);
  write_hypercube(cube, args.out_cube);
  write_mask(mask, args.out_mask);
  std::cerr << "synth: " << spec.height << "x" << spec.width << "x" << spec.bands
            << " seed=" << spec.seed << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// pipeline

struct PipelineArgs {
  std::string config_path;
  std::string cube_path, sig_path, mask_path, gt_path, out_map, out_roc;
  std::string method;
  // tri-state: -1 unset, 0 false, 1 true
  int use_prep = -1, use_postp = -1, reverse = -1, log_x = -1;
  CommonSift sift;
  bool sd_set = false, inner_set = false, imfs_set = false, support_set = false;
  int threads = 0;
  bool threads_set = false;
};

bool parse_config_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  fail(ErrorCode::unparseable_value,
       "pipeline config: cannot parse boolean for '" + key + "'");
}

int cmd_pipeline(const PipelineArgs& args) {
  std::string cube_path = args.cube_path, sig_path = args.sig_path;
  std::string mask_path = args.mask_path, gt_path = args.gt_path;
  std::string out_map = args.out_map, out_roc = args.out_roc;
  std::string method = args.method;
  int use_prep = args.use_prep, use_postp = args.use_postp;
  int reverse = args.reverse, log_x = args.log_x;
  CommonSift sift = args.sift;
  int threads = args.threads;
  bool threads_set = args.threads_set;

  if (!args.config_path.empty()) {
    static const std::vector<std::string> known = {
        "cube", "sig", "method", "mask", "gt", "out_map", "out_roc",
        "prep", "postp", "reverse", "log_x", "sd_threshold", "max_inner_iters",
        "max_imfs", "support_shape", "threads"};
    std::string text = detail::read_all_bytes(args.config_path, "pipeline config");
    std::map<std::string, std::string> kv;
    std::size_t pos = 0;
    long line_no = 0;
    while (pos < text.size()) {
      std::size_t eol = text.find('\n', pos);
      if (eol == std::string::npos) eol = text.size();
      ++line_no;
      std::string line = detail::trimmed(std::string_view(text).substr(pos, eol - pos));
      pos = eol + 1;
      if (line.empty() || line.front() == '#') continue;
      std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        fail(ErrorCode::unparseable_line,
             "pipeline config: line " + std::to_string(line_no) + " is not key=value");
      std::string key = detail::trimmed(std::string_view(line).substr(0, eq));
      std::string value = detail::trimmed(std::string_view(line).substr(eq + 1));
      bool ok = false;
      for (const auto& k : known)
        if (k == key) {
          ok = true;
          break;
        }
      if (!ok) fail(ErrorCode::unknown_key, "pipeline config: unknown key '" + key + "'");
      kv[key] = value;
    }
    auto take = [&](const char* key, std::string& target) {
      if (target.empty() && kv.count(key)) target = kv[key];
    };
    take("cube", cube_path);
    take("sig", sig_path);
    take("mask", mask_path);
    take("gt", gt_path);
    take("out_map", out_map);
    take("out_roc", out_roc);
    take("method", method);
    auto take_bool = [&](const char* key, int& target) {
      if (target == -1 && kv.count(key))
        target = parse_config_bool(kv[key], key) ? 1 : 0;
    };
    take_bool("prep", use_prep);
    take_bool("postp", use_postp);
    take_bool("reverse", reverse);
    take_bool("log_x", log_x);
    auto parse_numeric = [&](const char* key, auto& target, bool already_set) {
      if (already_set || !kv.count(key)) return;
      double v = 0.0;
      if (!detail::parse_double(kv[key], v))
        fail(ErrorCode::unparseable_value,
             std::string("pipeline config: cannot parse '") + key + "'");
      target = static_cast<std::remove_reference_t<decltype(target)>>(v);
    };
    parse_numeric("sd_threshold", sift.sd_threshold, args.sd_set);
    parse_numeric("max_inner_iters", sift.max_inner_iters, args.inner_set);
    parse_numeric("max_imfs", sift.max_imfs, args.imfs_set);
    if (!args.support_set && kv.count("support_shape")) sift.support = kv["support_shape"];
    if (!threads_set && kv.count("threads")) {
      double v = 0.0;
      if (!detail::parse_double(kv["threads"], v))
        fail(ErrorCode::unparseable_value, "pipeline config: cannot parse 'threads'");
      threads = static_cast<int>(v);
    }
  }

  if (cube_path.empty() || sig_path.empty())
    fail(ErrorCode::missing_key, "pipeline: 'cube' and 'sig' are required");
  if (method.empty()) method = "ace";

  Hypercube cube = read_hypercube(cube_path);
  Signature sc = read_signature(sig_path);
  GroundTruthMask mask, gt;
  PipelineConfig cfg;
  cfg.method = method_from_name(method);
  cfg.use_prep = use_prep == 1;
  cfg.use_postp = use_postp == 1;
  cfg.reverse = reverse == 1;
  cfg.roc_log_x = log_x == 1;
  cfg.sift = sift.to_params();
  cfg.threads = threads;
  cfg.out_map_path = out_map;
  cfg.out_roc_path = out_roc;
  if (!mask_path.empty()) {
    mask = read_mask(mask_path);
    cfg.stats_mask = &mask;
  }
  if (!gt_path.empty()) {
    gt = read_mask(gt_path);
    cfg.ground_truth = &gt;
  }

  PipelineResult result = run_pipeline(cube, sc, cfg);
  std::cerr << "pipeline: degenerate_pixels=" << result.report.degenerate_pixels
            << " prep=" << result.report.prep_seconds
            << "s classify=" << result.report.classify_seconds
            << "s postp=" << result.report.postp_seconds
            << "s roc=" << result.report.roc_seconds << "s\n";
  if (!result.report.prep_imf_histogram.empty()) {
    std::cerr << "pipeline: prep imf histogram:";
    for (std::size_t i = 0; i < result.report.prep_imf_histogram.size(); ++i)
      std::cerr << " " << i << ":" << result.report.prep_imf_histogram[i];
    std::cerr << "\n";
  }
  if (result.roc) std::cout << "AUC=" << format_g17(result.roc->auc) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plumekit: hyperspectral chemical plume detection toolkit"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "worker threads (default: PLUMEKIT_THREADS or hardware)");
  app.fallthrough();

  DecomposeArgs dec;
  CLI::App* decompose = app.add_subcommand(
      "decompose", "iterative-filtering decomposition of a signal or image");
  decompose->add_option("--input", dec.input, "signal CSV (1-D) or DMP1 image (2-D)")
      ->required();
  decompose->add_option("--dims", dec.dims, "1 or 2")
      ->required()
      ->check(CLI::IsMember({1, 2}));
  decompose->add_option("--out-prefix", dec.out_prefix, "output path prefix")->required();
  decompose->add_flag("--verify", dec.verify, "re-read outputs and check reconstruction");
  add_sift_options(decompose, dec.sift);

  ClassifyArgs cls;
  CLI::App* classify_cmd =
      app.add_subcommand("classify", "score a cube against a target signature");
  classify_cmd->add_option("--cube", cls.cube_path, "HSC1 cube or ENVI-BSQ data/header")
      ->required();
  classify_cmd->add_option("--sig", cls.sig_path, "target signature CSV")->required();
  classify_cmd->add_option("--method", cls.method, "cos|mf|ace")
      ->check(CLI::IsMember({"cos", "mf", "ace"}));
  classify_cmd->add_option("--mask", cls.mask_path,
                           "GTM1 mask restricting background statistics");
  classify_cmd->add_option("--out", cls.out_path, "output detection map")->required();
  classify_cmd->add_option("--format", cls.format, "dmp1|csv|pgm16")
      ->check(CLI::IsMember({"dmp1", "csv", "pgm16"}));
  classify_cmd->add_flag("--prep", cls.use_prep, "spectral detrending before scoring");
  classify_cmd->add_flag("--postp", cls.use_postp, "spatial detrending of the map");
  classify_cmd->add_flag("--reverse", cls.reverse, "flip scores around their range");
  add_sift_options(classify_cmd, cls.sift);

  RocArgs roc_args;
  CLI::App* roc_cmd = app.add_subcommand("roc", "ROC curve and AUC for a scored map");
  roc_cmd->add_option("--scores", roc_args.scores_path, "DMP1 detection map")->required();
  roc_cmd->add_option("--gt", roc_args.gt_path, "GTM1 ground truth")->required();
  roc_cmd->add_option("--out", roc_args.out_path, "ROC CSV path");
  roc_cmd->add_flag("--log-x", roc_args.log_x, "mark the CSV for log-scale FPR");

  SynthArgs syn;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic scene");
  synth_cmd->add_option("--spec", syn.spec_path, "scene spec (key=value)")->required();
  synth_cmd->add_option("--sig", syn.sig_path, "target signature CSV")->required();
  synth_cmd->add_option("--out-cube", syn.out_cube, "HSC1 output")->required();
  synth_cmd->add_option("--out-mask", syn.out_mask, "GTM1 output")->required();

  PipelineArgs pipe;
  CLI::App* pipeline_cmd =
      app.add_subcommand("pipeline", "config-driven end-to-end run");
  pipeline_cmd->add_option("--config", pipe.config_path, "key=value config file");
  pipeline_cmd->add_option("--cube", pipe.cube_path, "HSC1 cube or ENVI-BSQ");
  pipeline_cmd->add_option("--sig", pipe.sig_path, "target signature CSV");
  pipeline_cmd->add_option("--mask", pipe.mask_path, "stats mask (GTM1)");
  pipeline_cmd->add_option("--gt", pipe.gt_path, "ground truth (GTM1), enables ROC");
  pipeline_cmd->add_option("--out-map", pipe.out_map, "detection map artifact");
  pipeline_cmd->add_option("--out-roc", pipe.out_roc, "ROC CSV artifact");
  pipeline_cmd->add_option("--method", pipe.method, "cos|mf|ace")
      ->check(CLI::IsMember({"cos", "mf", "ace"}));
  auto tri_flag = [&](const char* on, const char* off, int& target, const char* help) {
    pipeline_cmd->add_flag_callback(on, [&target] { target = 1; }, help);
    pipeline_cmd->add_flag_callback(off, [&target] { target = 0; }, "");
  };
  tri_flag("--prep", "--no-prep", pipe.use_prep, "spectral detrending before scoring");
  tri_flag("--postp", "--no-postp", pipe.use_postp, "spatial detrending of the map");
  tri_flag("--reverse", "--no-reverse", pipe.reverse, "flip scores around their range");
  tri_flag("--log-x", "--no-log-x", pipe.log_x, "mark ROC CSV for log-scale FPR");
  pipeline_cmd->add_option("--sd", pipe.sift.sd_threshold, "sifting stop threshold")
      ->each([&](const std::string&) { pipe.sd_set = true; });
  pipeline_cmd->add_option("--max-inner-iters", pipe.sift.max_inner_iters)
      ->each([&](const std::string&) { pipe.inner_set = true; });
  pipeline_cmd->add_option("--max-imfs", pipe.sift.max_imfs)
      ->each([&](const std::string&) { pipe.imfs_set = true; });
  pipeline_cmd->add_option("--support", pipe.sift.support)
      ->each([&](const std::string&) { pipe.support_set = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const char* stage = "plumekit";
  try {
    if (decompose->parsed()) {
      stage = "decompose";
      dec.threads = threads;
      return cmd_decompose(dec);
    }
    if (classify_cmd->parsed()) {
      stage = "classify";
      cls.threads = threads;
      return cmd_classify(cls);
    }
    if (roc_cmd->parsed()) {
      stage = "roc";
      return cmd_roc(roc_args);
    }
    if (synth_cmd->parsed()) {
      stage = "synth";
      return cmd_synth(syn);
    }
    if (pipeline_cmd->parsed()) {
      stage = "pipeline";
      pipe.threads = threads;
      pipe.threads_set =
          app.count("--threads") > 0;
      return cmd_pipeline(pipe);
    }
  } catch (const plumekit::PlumeError& e) {
    std::cerr << "plumekit " << stage << ": error: " << e.what() << "\n";
    return plumekit::is_input_error(e.code()) ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "plumekit " << stage << ": error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
