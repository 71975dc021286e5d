// wrapnet - mesh autoencoder command line.
//
// Subcommands: gen-data, pretrain-unwrap, train, encode, decode, reconstruct,
// interpolate, eval-metrics, export-codewords, grad-check, dump-grid.
// Configuration precedence: flags > config file > defaults; the resolved
// config is echoed into the output directory of training commands. The
// WRAPNET_SEED environment variable is the seed fallback.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wrapnet/checkpoint.hpp"
#include "wrapnet/dataset.hpp"
#include "wrapnet/diagnostics.hpp"
#include "wrapnet/metrics.hpp"
#include "wrapnet/model.hpp"
#include "wrapnet/synthetic.hpp"

namespace fs = std::filesystem;
using namespace wrapnet;

namespace {

struct ModelFlags {
  std::optional<int> codeword, fe_hidden, fe_out, mlp_hidden, mlp_hidden_layers, unwrap_hidden,
      wrap_hidden, block_pairs, levels, grid_size, chamfer_samples;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> grid_variant, mode;
  std::string config_file;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key=value config file");
    app->add_option("--codeword", codeword, "codeword length");
    app->add_option("--fe-hidden", fe_hidden, "feature extractor conv width");
    app->add_option("--fe-out", fe_out, "feature extractor output width");
    app->add_option("--mlp-hidden", mlp_hidden, "shared MLP hidden width");
    app->add_option("--mlp-hidden-layers", mlp_hidden_layers, "shared MLP hidden layer count");
    app->add_option("--unwrap-hidden", unwrap_hidden, "unwrap block width");
    app->add_option("--wrap-hidden", wrap_hidden, "wrap block width");
    app->add_option("--block-pairs", block_pairs, "conv+face2node pairs per block");
    app->add_option("--levels", levels, "subdivision levels (0 or 3)");
    app->add_option("--grid-size", grid_size, "sphere grid size (0 = derive)");
    app->add_option("--grid-variant", grid_variant, "full_sphere | as_written");
    app->add_option("--mode", mode, "send_base_graph | send_approx_sphere | send_base_mesh");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--seed", seed, "global seed");
    app->add_option("--chamfer-samples", chamfer_samples, "sphere samples per Chamfer term (0 = vertex count)");
  }

  ModelConfig resolve() const {
    KeyValueMap kv;
    if (!config_file.empty()) kv = KeyValueMap::load(config_file);
    ModelConfig c = ModelConfig::from_kv(kv);
    if (!kv.contains("seed")) {
      if (const char* env = std::getenv("WRAPNET_SEED")) c.seed = std::strtoull(env, nullptr, 10);
    }
    if (codeword) c.codeword = *codeword;
    if (fe_hidden) c.fe_hidden = *fe_hidden;
    if (fe_out) c.fe_out = *fe_out;
    if (mlp_hidden) c.mlp_hidden = *mlp_hidden;
    if (mlp_hidden_layers) c.mlp_hidden_layers = *mlp_hidden_layers;
    if (unwrap_hidden) c.unwrap_hidden = *unwrap_hidden;
    if (wrap_hidden) c.wrap_hidden = *wrap_hidden;
    if (block_pairs) c.block_pairs = *block_pairs;
    if (levels) c.levels = *levels;
    if (grid_size) c.grid_size = *grid_size;
    if (chamfer_samples) c.chamfer_samples = *chamfer_samples;
    if (lr) c.lr = *lr;
    if (seed) c.seed = *seed;
    if (grid_variant) c.grid_variant = grid_variant_from_string(*grid_variant);
    if (mode) c.mode = bottleneck_mode_from_string(*mode);
    c.validate();
    return c;
  }
};

std::vector<std::string> split_ids(const std::string& csv) {
  std::vector<std::string> ids;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) ids.push_back(tok);
  return ids;
}

void echo_config(const ModelConfig& config, const std::string& out_dir) {
  KeyValueMap kv;
  config.to_kv(kv);
  kv.save((fs::path(out_dir) / "config.resolved.txt").string());
}

SphereGrid grid_for(const ModelConfig& config, std::span<const PreparedMesh> meshes) {
  const int n = config.grid_size > 0 ? config.grid_size : derive_grid_size(meshes);
  return fibonacci_grid(n, config.grid_variant);
}

PreparedMesh prepare_single(const std::string& mesh_path, const std::string& base_path,
                            const std::string& full_path, const ModelConfig& config) {
  if (config.levels == 0) {
    if (mesh_path.empty())
      throw std::runtime_error("this checkpoint is a vanilla model: pass --mesh");
    return PreparedMesh(fs::path(mesh_path).stem().string(), "-", load_mesh(mesh_path));
  }
  if (base_path.empty() || full_path.empty())
    throw std::runtime_error("this checkpoint is a subdivision model: pass --base and --full");
  return PreparedMesh(fs::path(base_path).stem().string(), "-", load_mesh(base_path),
                      load_mesh(full_path), config.levels);
}

int cmd_gen_data(const std::string& out_dir, std::uint64_t seed) {
  const DatasetManifest manifest = gen_synthetic(out_dir, seed);
  for (const auto& item : manifest.items)
    std::printf("item=%s class=%s plain=%s base=%s full=%s\n", item.id.c_str(),
                item.label.c_str(), item.plain_path.c_str(), item.base_path.c_str(),
                item.full_path.c_str());
  std::printf("dataset=%s items=%zu\n", out_dir.c_str(), manifest.items.size());
  return 0;
}

int cmd_dump_grid(int n, const std::string& variant, const std::string& out_path) {
  const SphereGrid grid = fibonacci_grid(n, grid_variant_from_string(variant));
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << "OFF\n" << grid.size() << " 0 0\n";
  for (const Vec3& p : grid.points)
    out << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.z) << '\n';
  if (!out) throw std::runtime_error("write failure: " + out_path);
  std::printf("grid_size=%d variant=%s out=%s\n", n, variant.c_str(), out_path.c_str());
  return 0;
}

int cmd_grad_check(std::uint64_t seed, int instances) {
  const std::vector<BatteryCase> cases = run_gradient_battery(seed, instances);
  bool all_pass = true;
  for (const BatteryCase& c : cases) {
    const bool ok = c.report.pass && !c.report.kink_rejected;
    all_pass = all_pass && ok;
    std::printf("check=%s instance=%d pass=%d max_rel_error=%.3e\n", c.name.c_str(), c.instance,
                ok ? 1 : 0, c.report.max_rel_error);
  }
  std::printf("grad_check=%s\n", all_pass ? "pass" : "fail");
  return all_pass ? 0 : 1;
}

int cmd_pretrain(const std::string& dataset_dir, const std::string& out_dir,
                 const std::string& items_csv, int steps, const ModelFlags& flags) {
  ModelConfig config = flags.resolve();
  const DatasetManifest manifest = load_manifest(dataset_dir);
  const std::vector<PreparedMesh> meshes =
      prepare_dataset(manifest, config, split_ids(items_csv));
  const SphereGrid grid = grid_for(config, meshes);
  config.grid_size = grid.size();

  WrapNetParams params = make_params(config);
  AdamGroups adam;
  pretrain_unwrap(meshes, params, adam, steps, [](int step, double chamfer) {
    std::printf("step=%d chamfer=%.17g\n", step, chamfer);
  });
  const double norm_dev = mean_unwrap_norm_deviation(meshes, params);
  std::printf("norm_deviation=%.17g\n", norm_dev);

  fs::create_directories(out_dir);
  echo_config(config, out_dir);
  save_checkpoint((fs::path(out_dir) / "model.wnck").string(), params);
  std::printf("checkpoint=%s\n", (fs::path(out_dir) / "model.wnck").string().c_str());
  return 0;
}

int cmd_train(const std::string& dataset_dir, const std::string& out_dir,
              const std::string& items_csv, int steps, int pretrain_steps,
              const std::string& init_ckpt, const ModelFlags& flags) {
  ModelConfig config;
  std::optional<WrapNetParams> params;
  if (!init_ckpt.empty()) {
    params = load_checkpoint(init_ckpt);
    config = params->config;  // architecture comes from the checkpoint
  } else {
    config = flags.resolve();
  }
  const DatasetManifest manifest = load_manifest(dataset_dir);
  const std::vector<PreparedMesh> meshes =
      prepare_dataset(manifest, config, split_ids(items_csv));
  const SphereGrid grid = grid_for(config, meshes);
  config.grid_size = grid.size();
  if (!params) params = make_params(config);
  params->config.grid_size = config.grid_size;

  AdamGroups adam;
  if (pretrain_steps > 0)
    pretrain_unwrap(meshes, *params, adam, pretrain_steps, [](int step, double chamfer) {
      std::printf("phase=pretrain step=%d chamfer=%.17g\n", step, chamfer);
    });
  for (int s = 0; s < steps; ++s) {
    const StepStats stats = train_step(meshes, *params, adam, grid, s);
    std::printf("step=%d mse=%.17g chamfer=%.17g\n", s, stats.mse, stats.chamfer);
  }

  fs::create_directories(out_dir);
  echo_config(params->config, out_dir);
  save_checkpoint((fs::path(out_dir) / "model.wnck").string(), *params);
  std::printf("checkpoint=%s\n", (fs::path(out_dir) / "model.wnck").string().c_str());
  return 0;
}

BottleneckPayload encode_file(WrapNetParams& params, const std::string& mesh_path,
                              const std::string& base_path, const std::string& full_path) {
  const PreparedMesh mesh = prepare_single(mesh_path, base_path, full_path, params.config);
  std::vector<PreparedMesh> one;
  one.push_back(mesh);
  const SphereGrid grid = grid_for(params.config, one);
  return encode(one[0], params, grid).payload;
}

int cmd_encode(const std::string& ckpt, const std::string& mesh_path, const std::string& base_path,
               const std::string& full_path, const std::string& out_path) {
  WrapNetParams params = load_checkpoint(ckpt);
  const BottleneckPayload payload = encode_file(params, mesh_path, base_path, full_path);
  save_bottleneck(out_path, payload);
  std::printf("bottleneck=%s codeword=%zu triangles=%zu grid_size=%d\n", out_path.c_str(),
              payload.codeword.size(), payload.base_graph.size(), payload.grid_size);
  return 0;
}

int cmd_decode(const std::string& ckpt, const std::string& bottleneck_path,
               const std::string& out_path) {
  WrapNetParams params = load_checkpoint(ckpt);
  const BottleneckPayload payload = load_bottleneck(bottleneck_path);
  const SphereGrid grid = fibonacci_grid(payload.grid_size, payload.grid_variant);
  const Mesh mesh = decode(payload, params, grid);
  save_mesh(mesh, out_path);
  std::printf("mesh=%s vertices=%d faces=%d\n", out_path.c_str(), mesh.vertex_count(),
              mesh.face_count());
  return 0;
}

int cmd_reconstruct(const std::string& ckpt, const std::string& mesh_path,
                    const std::string& base_path, const std::string& full_path,
                    const std::string& out_path, const std::string& bottleneck_out) {
  WrapNetParams params = load_checkpoint(ckpt);
  const BottleneckPayload payload = encode_file(params, mesh_path, base_path, full_path);
  const SphereGrid grid = fibonacci_grid(payload.grid_size, payload.grid_variant);
  const Mesh mesh = decode(payload, params, grid);
  save_mesh(mesh, out_path);
  if (!bottleneck_out.empty()) save_bottleneck(bottleneck_out, payload);
  std::printf("mesh=%s vertices=%d faces=%d\n", out_path.c_str(), mesh.vertex_count(),
              mesh.face_count());
  return 0;
}

int cmd_interpolate(const std::string& ckpt, const std::string& bottleneck_path,
                    const std::string& codeword_from, double t, const std::string& out_path) {
  WrapNetParams params = load_checkpoint(ckpt);
  const BottleneckPayload payload = load_bottleneck(bottleneck_path);
  const BottleneckPayload other = load_bottleneck(codeword_from);
  const SphereGrid grid = fibonacci_grid(payload.grid_size, payload.grid_variant);
  const Mesh mesh = interpolate(payload, other.codeword, t, params, grid);
  save_mesh(mesh, out_path);
  std::printf("mesh=%s t=%.17g\n", out_path.c_str(), t);
  return 0;
}

int cmd_eval_metrics(const std::string& ckpt, const std::string& dataset_dir,
                     const std::string& items_csv, const std::string& out_path) {
  WrapNetParams params = load_checkpoint(ckpt);
  const DatasetManifest manifest = load_manifest(dataset_dir);
  const std::vector<PreparedMesh> meshes =
      prepare_dataset(manifest, params.config, split_ids(items_csv));
  const SphereGrid grid = grid_for(params.config, meshes);

  std::ostringstream csv;
  csv << "id,cd,ne,cp\n";
  for (const PreparedMesh& mesh : meshes) {
    const EncodeResult enc = encode(mesh, params, grid);
    const Mesh decoded = decode(enc.payload, params, grid);
    const PointSet truth = mesh_point_set(mesh.finest);
    const PointSet recon = mesh_point_set(decoded);
    const double cd = chamfer(truth, recon);
    const double ne = normals_error(truth, recon);
    const double cp = curvature_preservation(truth, recon);
    csv << mesh.id << ',' << format_double(cd) << ',' << format_double(ne) << ','
        << format_double(cp) << '\n';
    std::printf("id=%s cd=%.17g ne=%.17g cp=%.17g\n", mesh.id.c_str(), cd, ne, cp);
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << csv.str();
  if (!out) throw std::runtime_error("write failure: " + out_path);
  return 0;
}

int cmd_export_codewords(const std::string& ckpt, const std::string& dataset_dir,
                         const std::string& items_csv, const std::string& out_path) {
  WrapNetParams params = load_checkpoint(ckpt);
  const DatasetManifest manifest = load_manifest(dataset_dir);
  const std::vector<PreparedMesh> meshes =
      prepare_dataset(manifest, params.config, split_ids(items_csv));
  const SphereGrid grid = grid_for(params.config, meshes);

  std::ostringstream csv;
  csv << "id,label";
  for (int i = 0; i < params.config.codeword; ++i) csv << ",c" << i;
  csv << '\n';
  for (const PreparedMesh& mesh : meshes) {
    const EncodeResult enc = encode(mesh, params, grid);
    csv << mesh.id << ',' << mesh.label;
    for (double c : enc.payload.codeword) csv << ',' << format_double(c);
    csv << '\n';
    std::printf("id=%s label=%s codeword=%zu\n", mesh.id.c_str(), mesh.label.c_str(),
                enc.payload.codeword.size());
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << csv.str();
  if (!out) throw std::runtime_error("write failure: " + out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wrapnet - sphere-grid mesh autoencoder"};
  app.require_subcommand(1);

  // gen-data
  std::string gd_out;
  std::uint64_t gd_seed = 1;
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  gen->add_option("--out", gd_out, "output directory")->required();
  gen->add_option("--seed", gd_seed, "dataset seed");

  // dump-grid
  int dg_n = 0;
  std::string dg_variant = "full_sphere", dg_out;
  auto* dump = app.add_subcommand("dump-grid", "write the sphere grid as an OFF point cloud");
  dump->add_option("--n", dg_n, "grid size")->required();
  dump->add_option("--variant", dg_variant, "full_sphere | as_written");
  dump->add_option("--out", dg_out, "output OFF path")->required();

  // grad-check
  std::uint64_t gc_seed = 1;
  int gc_instances = 5;
  auto* gc = app.add_subcommand("grad-check", "finite-difference gradient verification");
  gc->add_option("--seed", gc_seed, "battery seed");
  gc->add_option("--instances", gc_instances, "instances per layer kind");

  // pretrain-unwrap
  std::string pt_dataset, pt_out, pt_items;
  int pt_steps = 1000;
  ModelFlags pt_flags;
  auto* pt = app.add_subcommand("pretrain-unwrap", "Chamfer-only unwrap pretraining");
  pt->add_option("--dataset", pt_dataset, "dataset directory")->required();
  pt->add_option("--out", pt_out, "output directory")->required();
  pt->add_option("--items", pt_items, "comma-separated item ids (default: all)");
  pt->add_option("--steps", pt_steps, "Adam steps");
  pt_flags.attach(pt);

  // train
  std::string tr_dataset, tr_out, tr_items, tr_init;
  int tr_steps = 2000, tr_pretrain = 0;
  ModelFlags tr_flags;
  auto* tr = app.add_subcommand("train", "joint training");
  tr->add_option("--dataset", tr_dataset, "dataset directory")->required();
  tr->add_option("--out", tr_out, "output directory")->required();
  tr->add_option("--items", tr_items, "comma-separated item ids (default: all)");
  tr->add_option("--steps", tr_steps, "joint Adam steps");
  tr->add_option("--pretrain-steps", tr_pretrain, "unwrap pretraining steps before joint training");
  tr->add_option("--init", tr_init, "initialize from checkpoint (architecture comes from it)");
  tr_flags.attach(tr);

  // encode / decode / reconstruct / interpolate
  std::string en_ckpt, en_mesh, en_base, en_full, en_out;
  auto* en = app.add_subcommand("encode", "encode a mesh into a bottleneck file");
  en->add_option("--ckpt", en_ckpt, "checkpoint")->required();
  en->add_option("--mesh", en_mesh, "input mesh (vanilla models)");
  en->add_option("--base", en_base, "base mesh (subdivision models)");
  en->add_option("--full", en_full, "full-resolution mesh (subdivision models)");
  en->add_option("--out", en_out, "output .wnb path")->required();

  std::string de_ckpt, de_wnb, de_out;
  auto* de = app.add_subcommand("decode", "decode a bottleneck file into a mesh");
  de->add_option("--ckpt", de_ckpt, "checkpoint")->required();
  de->add_option("--bottleneck", de_wnb, "input .wnb path")->required();
  de->add_option("--out", de_out, "output mesh path")->required();

  std::string rc_ckpt, rc_mesh, rc_base, rc_full, rc_out, rc_wnb;
  auto* rc = app.add_subcommand("reconstruct", "encode then decode");
  rc->add_option("--ckpt", rc_ckpt, "checkpoint")->required();
  rc->add_option("--mesh", rc_mesh, "input mesh (vanilla models)");
  rc->add_option("--base", rc_base, "base mesh (subdivision models)");
  rc->add_option("--full", rc_full, "full-resolution mesh (subdivision models)");
  rc->add_option("--out", rc_out, "output mesh path")->required();
  rc->add_option("--bottleneck-out", rc_wnb, "also save the bottleneck file");

  std::string ip_ckpt, ip_wnb, ip_from, ip_out;
  double ip_t = 0.5;
  auto* ip = app.add_subcommand("interpolate", "decode a blend of two codewords");
  ip->add_option("--ckpt", ip_ckpt, "checkpoint")->required();
  ip->add_option("--bottleneck", ip_wnb, "base bottleneck (graph + first codeword)")->required();
  ip->add_option("--codeword-from", ip_from, "bottleneck supplying the second codeword")->required();
  ip->add_option("--t", ip_t, "blend factor in [0,1]");
  ip->add_option("--out", ip_out, "output mesh path")->required();

  // eval-metrics / export-codewords
  std::string ev_ckpt, ev_dataset, ev_items, ev_out;
  auto* ev = app.add_subcommand("eval-metrics", "reconstruction metrics CSV");
  ev->add_option("--ckpt", ev_ckpt, "checkpoint")->required();
  ev->add_option("--dataset", ev_dataset, "dataset directory")->required();
  ev->add_option("--items", ev_items, "comma-separated item ids (default: all)");
  ev->add_option("--out", ev_out, "output CSV path")->required();

  std::string xc_ckpt, xc_dataset, xc_items, xc_out;
  auto* xc = app.add_subcommand("export-codewords", "codeword CSV for external classifiers");
  xc->add_option("--ckpt", xc_ckpt, "checkpoint")->required();
  xc->add_option("--dataset", xc_dataset, "dataset directory")->required();
  xc->add_option("--items", xc_items, "comma-separated item ids (default: all)");
  xc->add_option("--out", xc_out, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(gd_out, gd_seed);
    if (dump->parsed()) return cmd_dump_grid(dg_n, dg_variant, dg_out);
    if (gc->parsed()) return cmd_grad_check(gc_seed, gc_instances);
    if (pt->parsed()) return cmd_pretrain(pt_dataset, pt_out, pt_items, pt_steps, pt_flags);
    if (tr->parsed())
      return cmd_train(tr_dataset, tr_out, tr_items, tr_steps, tr_pretrain, tr_init, tr_flags);
    if (en->parsed()) return cmd_encode(en_ckpt, en_mesh, en_base, en_full, en_out);
    if (de->parsed()) return cmd_decode(de_ckpt, de_wnb, de_out);
    if (rc->parsed()) return cmd_reconstruct(rc_ckpt, rc_mesh, rc_base, rc_full, rc_out, rc_wnb);
    if (ip->parsed()) return cmd_interpolate(ip_ckpt, ip_wnb, ip_from, ip_t, ip_out);
    if (ev->parsed()) return cmd_eval_metrics(ev_ckpt, ev_dataset, ev_items, ev_out);
    if (xc->parsed()) return cmd_export_codewords(xc_ckpt, xc_dataset, xc_items, xc_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  std::fprintf(stderr, "error: no subcommand\n");
  return 1;
}
