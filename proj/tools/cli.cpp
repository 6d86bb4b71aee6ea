#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "vidembed/service/query_service.hpp"
#include "vidembed/vidembed.hpp"

namespace vidembed::cli {
namespace {

namespace fs = std::filesystem;

struct Global {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct GenOpts {
  std::string out;
  std::string task = "anchor";
  SynthConfig synth;
};

struct HeadOpts {
  std::string kind = "max_pool";
  std::string params;
  std::size_t hidden = 0, d_model = 0, layers = 2, heads = 4, ffn = 0;
  std::string pooling = "cls";
};

HeadOpts lstm_head() {
  HeadOpts h;
  h.kind = "lstm";
  return h;
}

struct TrainOpts {
  std::string data, out, history;
  std::size_t frames = 0;
  TrainConfig cfg;
  HeadOpts head = lstm_head();
};

struct EvalOpts {
  std::string data, split, confusion;
  std::size_t frames = 0;
  HeadOpts head;
};

struct EncodeOpts {
  std::string data, out, embeddings;
  std::size_t frames = 0;
  HeadOpts head;
};

struct QueryOpts {
  std::string index, vector, vector_file, cls, data;
  std::size_t k = kDefaultTopK;
};

struct ProjectOpts {
  std::string data, out, level = "videos";
  std::size_t frames = 0;
  HeadOpts head;
};

struct GradcheckOpts {
  std::string head = "lstm";
  std::size_t frames = 4, dim = 6, layers = 1, heads = 2;
  double step = 1e-5, tol = 1e-4;
};

struct ServeOpts {
  std::string index, data, host = "127.0.0.1";
  int port = 8080;
};

void add_head_options(CLI::App* cmd, HeadOpts& h, bool with_params = true) {
  cmd->add_option("--head", h.kind, "mid_frame | max_pool | majority_vote | lstm | transformer")
      ->check(CLI::IsMember({"mid_frame", "max_pool", "majority_vote", "lstm", "transformer"}));
  if (with_params) cmd->add_option("--params", h.params, "trained head parameters (lstm/transformer)");
}

void add_arch_options(CLI::App* cmd, HeadOpts& h) {
  cmd->add_option("--hidden", h.hidden, "lstm hidden size (default: input dim)");
  cmd->add_option("--d-model", h.d_model, "transformer width (default: input dim)");
  cmd->add_option("--layers", h.layers, "transformer encoder blocks");
  cmd->add_option("--heads", h.heads, "attention heads");
  cmd->add_option("--ffn", h.ffn, "feed-forward width (default: 4·d_model)");
  cmd->add_option("--pooling", h.pooling, "cls | mean")->check(CLI::IsMember({"cls", "mean"}));
}

HeadSpec spec_from(const HeadOpts& h, std::size_t dim) {
  auto s = HeadSpec::defaults(parse_head(h.kind), dim);
  if (h.hidden) s.hidden = h.hidden;
  if (h.d_model) {
    s.d_model = h.d_model;
    s.ffn = 4 * h.d_model;
  }
  if (h.ffn) s.ffn = h.ffn;
  s.layers = h.layers;
  s.heads = h.heads;
  s.pooling = h.pooling == "mean" ? Pooling::Mean : Pooling::Cls;
  validate(s);
  return s;
}

/// Trained heads come from --params; baselines are built from the data dimension.
HeadParams<float> resolve_head(const HeadOpts& h, std::size_t dim) {
  const auto kind = parse_head(h.kind);
  if (is_trainable(kind)) {
    require(!h.params.empty(), Errc::ConfigInvalid, "--params is required for the " + h.kind + " head");
    auto p = load_params<float>(h.params);
    require(p.spec.kind == kind, Errc::ConfigInvalid, h.params + " holds a " + head_name(p.spec.kind) + " head");
    require(p.spec.d_in == dim, Errc::DimMismatch, "head input dimension differs from the dataset");
    return p;
  }
  return baseline_head(kind, dim);
}

std::vector<FrameSequence> select_split(const DatasetManifest& m, const std::string& split, std::size_t frames) {
  if (split.empty() || split == "all") {
    if (split.empty() && !m.split("val").empty()) return load_sequences(m, m.split("val"), frames);
    return load_all(m, frames);
  }
  return load_sequences(m, m.split(split), frames);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

int cmd_gen(const Global& g, GenOpts& o, std::ostream& out) {
  o.synth.seed = g.seed;
  o.synth.task = parse_task(o.task);
  validate(o.synth);
  const auto m = generate_synthetic(o.synth, o.out);
  nlohmann::json j = {{"manifest", (fs::path(o.out) / "manifest.jsonl").string()}, {"videos", m.records.size()}};
  if (m.extra.contains("frame_separability")) j["frame_separability"] = m.extra["frame_separability"];
  out << j.dump() << "\n";
  return kExitOk;
}

int cmd_train(const Global& g, TrainOpts& o, std::ostream& out, std::ostream& err) {
  const auto m = read_manifest(o.data);
  const auto protos = load_prototypes(m);
  o.cfg.seed = g.seed;
  o.cfg.threads = g.threads;
  o.cfg.head = spec_from(o.head, m.dim);
  require(is_trainable(o.cfg.head.kind), Errc::HeadNotTrainable, o.head.kind + " has nothing to train");
  auto result = train(m, protos, o.cfg, o.frames, [&](const EpochRecord& e) {
    err << "epoch " << e.epoch << " train_loss " << format_double(e.train_loss) << " val_loss "
        << format_double(e.val_loss) << " train_acc " << format_double(e.train_acc) << " val_acc "
        << format_double(e.val_acc) << " (" << format_double(e.seconds) << " s)\n";
  });
  save_params(o.out, result.params);
  if (!o.history.empty()) write_file_atomic(o.history, history_csv(result.history));
  const auto& last = result.history.epochs.back();
  out << nlohmann::json({{"params", o.out},
                         {"fingerprint", fingerprint(result.params)},
                         {"epochs", result.history.epochs.size()},
                         {"train_acc", last.train_acc},
                         {"val_acc", last.val_acc}})
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_eval(const Global& g, const EvalOpts& o, std::ostream& out) {
  const auto m = read_manifest(o.data);
  const auto protos = load_prototypes(m);
  const auto head = resolve_head(o.head, m.dim);
  const auto videos = select_split(m, o.split, o.frames);
  const auto r = evaluate(videos, head, protos, g.threads);
  if (!o.confusion.empty()) {
    std::string csv = "true\\predicted";
    for (const auto& n : protos.names) csv += "," + n;
    csv += "\n";
    for (std::size_t i = 0; i < r.confusion.size(); ++i) {
      csv += protos.names[i];
      for (auto c : r.confusion[i]) csv += "," + std::to_string(c);
      csv += "\n";
    }
    write_file_atomic(o.confusion, csv);
  }
  out << nlohmann::json({{"head", o.head.kind}, {"accuracy", r.accuracy}, {"correct", r.correct}, {"total", r.total}})
             .dump()
      << "\n";
  return kExitOk;
}

RetrievalIndex build_from(const Global& g, const EncodeOpts& o) {
  if (!o.embeddings.empty()) return RetrievalIndex::load(o.embeddings);
  require(!o.data.empty(), Errc::ConfigInvalid, "--data or --embeddings is required");
  const auto m = read_manifest(o.data);
  return RetrievalIndex::build(load_all(m, o.frames), resolve_head(o.head, m.dim), g.threads);
}

int cmd_encode(const Global& g, const EncodeOpts& o, std::ostream& out, bool as_index) {
  const auto index = build_from(g, o);
  index.save(o.out);
  out << nlohmann::json({{as_index ? "index" : "embeddings", o.out},
                         {"rows", index.size()},
                         {"dim", index.dim()},
                         {"head", index.head()},
                         {"fingerprint", index.fingerprint()}})
             .dump()
      << "\n";
  return kExitOk;
}

std::vector<float> parse_vector(const std::string& text) {
  std::vector<float> v;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stof(tok, &used));
      require(tok.find_first_not_of(" \t", used) == std::string::npos, Errc::ParseError, "bad number '" + tok + "'");
    } catch (const std::logic_error&) {
      fail(Errc::ParseError, "bad number '" + tok + "'");
    }
  }
  return v;
}

int cmd_query(const QueryOpts& o, std::ostream& out) {
  const auto index = RetrievalIndex::load(o.index);
  std::vector<float> q;
  std::optional<std::size_t> cls;
  if (!o.vector.empty()) {
    q = parse_vector(o.vector);
  } else if (!o.vector_file.empty()) {
    q = read_embeddings<float>(o.vector_file).to_vector();
  } else {
    require(!o.data.empty(), Errc::ConfigInvalid, "--class needs --data to resolve prototypes");
    const auto protos = load_prototypes(read_manifest(o.data));
    cls = protos.find(o.cls);
    require(cls.has_value(), Errc::ConfigInvalid, "unknown class '" + o.cls + "'");
    auto row = protos.vectors.row(*cls);
    q.assign(row.begin(), row.end());
  }
  const auto r = index.query(q, o.k);
  nlohmann::json j = {{"results", nlohmann::json::array()}, {"k", o.k}, {"fingerprint", index.fingerprint()}};
  for (const auto& item : r.items) j["results"].push_back({{"video_id", item.video_id}, {"score", item.score}});
  if (cls && !index.labels().empty()) {
    std::set<std::string> relevant;
    for (std::size_t i = 0; i < index.size(); ++i)
      if (index.labels()[i] == cls) relevant.insert(index.ids()[i]);
    j["precision_at_k"] = precision_at_k(r, relevant);
  }
  out << j.dump() << "\n";
  return kExitOk;
}

int cmd_project(const Global& g, const ProjectOpts& o, std::ostream& out) {
  const auto m = read_manifest(o.data);
  const auto videos = load_all(m, o.frames);
  std::vector<float> rows;
  std::vector<std::string> ids;
  std::vector<std::optional<std::size_t>> labels;
  nlohmann::json j;
  if (o.level == "frames") {
    for (const auto& v : videos)
      for (std::size_t t = 0; t < v.length(); ++t) {
        rows.insert(rows.end(), v.frames.row(t).begin(), v.frames.row(t).end());
        ids.push_back(v.video_id + "#" + std::to_string(t));
        labels.push_back(v.label);
      }
    const auto sep = cluster_separation(videos);
    j["cluster_separation"] = {{"ratio", sep.ratio},
                               {"intra_video_distance", sep.intra_video_distance},
                               {"inter_class_distance", sep.inter_class_distance}};
  } else {
    const auto index = RetrievalIndex::build(videos, resolve_head(o.head, m.dim), g.threads);
    rows = index.matrix().to_vector();
    ids = index.ids();
    labels = index.labels();
  }
  const auto proj = project_2d(Tensor<float>({ids.size(), m.dim}, std::move(rows)), ids, labels);
  write_file_atomic(o.out, projection_csv(proj));
  write_file_atomic(o.out + ".variance.csv", explained_variance_csv(proj));
  j["points"] = proj.points.size();
  j["explained_variance"] = {proj.explained[0], proj.explained[1]};
  j["out"] = o.out;
  out << j.dump() << "\n";
  return kExitOk;
}

int cmd_gradcheck(const Global& g, const GradcheckOpts& o, std::ostream& out) {
  auto spec = HeadSpec::defaults(parse_head(o.head), o.dim);
  spec.layers = o.layers;
  spec.heads = o.heads;
  validate(spec);
  HeadGradCheckOptions opt;
  opt.frames = o.frames;
  opt.step = o.step;
  opt.tolerance = o.tol;
  opt.seed = g.seed;
  const auto report = check_head_gradients(spec, opt);
  nlohmann::json j = {{"head", o.head}, {"tolerance", o.tol}, {"passed", report.all_passed()},
                      {"worst", report.worst()}, {"params", nlohmann::json::array()}};
  for (const auto& e : report.entries)
    j["params"].push_back({{"name", e.name}, {"max_rel_error", e.max_rel_error}, {"passed", e.passed}});
  out << j.dump(2) << "\n";
  return report.all_passed() ? kExitOk : kExitRuntime;
}

int cmd_serve(const Global& g, const ServeOpts& o, std::ostream& err) {
  std::optional<ClassPrototypes> protos;
  if (!o.data.empty()) protos = load_prototypes(read_manifest(o.data));
  const QueryService service(RetrievalIndex::load(o.index), std::move(protos));
  httplib::Server server;
  const std::size_t workers = std::max<std::size_t>(1, g.threads);
  server.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  service.mount(server);
  err << "serving " << service.index().size() << " videos on http://" << o.host << ":" << o.port << "\n";
  if (!server.listen(o.host, o.port)) fail(Errc::IoError, "cannot bind " + o.host + ":" + std::to_string(o.port));
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video-to-joint-embedding fusion heads, training and text-to-video retrieval"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file ([subcommand] sections); flags override it");
  Global g;
  app.add_option("--seed", g.seed, "seed for generation, initialisation and shuffling");
  app.add_option("--threads", g.threads, "worker threads for evaluation, indexing and per-batch gradients")
      ->check(CLI::PositiveNumber);

  GenOpts gen;
  auto* c_gen = app.add_subcommand("gen", "generate a synthetic dataset");
  c_gen->add_option("--out", gen.out, "output directory")->required();
  c_gen->add_option("--task", gen.task, "anchor | order")->check(CLI::IsMember({"anchor", "order"}));
  c_gen->add_option("--classes", gen.synth.classes);
  c_gen->add_option("--videos-per-class", gen.synth.videos_per_class);
  c_gen->add_option("--val-per-class", gen.synth.val_videos_per_class, "extra held-out videos per class");
  c_gen->add_option("--frames", gen.synth.frames);
  c_gen->add_option("--dim", gen.synth.dim);
  c_gen->add_option("--sigma", gen.synth.sigma, "frame drift noise scale, (0,1)");
  c_gen->add_option("--rho", gen.synth.rho, "AR(1) noise correlation, [0,1)");

  TrainOpts tr;
  auto* c_train = app.add_subcommand("train", "train an lstm or transformer head");
  c_train->add_option("--data", tr.data, "manifest.jsonl")->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", tr.out, "output parameter bundle")->required();
  c_train->add_option("--history", tr.history, "per-epoch CSV");
  c_train->add_option("--head", tr.head.kind, "lstm | transformer")->check(CLI::IsMember({"lstm", "transformer"}));
  add_arch_options(c_train, tr.head);
  c_train->add_option("--lr", tr.cfg.lr);
  c_train->add_option("--epochs", tr.cfg.epochs);
  c_train->add_option("--batch-size", tr.cfg.batch_size);
  c_train->add_option("--temperature", tr.cfg.temperature);
  c_train->add_option("--split", tr.cfg.split, "train share when records carry no split tags");
  c_train->add_option("--frames", tr.frames, "resample every video to this many frames (0 keeps them)");

  EvalOpts ev;
  auto* c_eval = app.add_subcommand("eval", "top-1 accuracy of a head");
  c_eval->add_option("--data", ev.data)->required()->check(CLI::ExistingFile);
  add_head_options(c_eval, ev.head);
  c_eval->add_option("--split", ev.split, "train | val | all (default: val when tagged, else all)")
      ->check(CLI::IsMember({"train", "val", "all"}));
  c_eval->add_option("--confusion", ev.confusion, "write the confusion matrix CSV here");
  c_eval->add_option("--frames", ev.frames);

  EncodeOpts enc, idx;
  auto* c_encode = app.add_subcommand("encode", "fuse every video once and write the embedding matrix");
  c_encode->add_option("--data", enc.data)->required()->check(CLI::ExistingFile);
  add_head_options(c_encode, enc.head);
  c_encode->add_option("--out", enc.out, "VEMB matrix; a .json sidecar is written next to it")->required();
  c_encode->add_option("--frames", enc.frames);

  auto* c_index = app.add_subcommand("index", "build a retrieval index");
  auto* idx_data = c_index->add_option("--data", idx.data)->check(CLI::ExistingFile);
  auto* idx_emb = c_index->add_option("--embeddings", idx.embeddings, "reuse an encode output")->check(CLI::ExistingFile);
  idx_data->excludes(idx_emb);
  add_head_options(c_index, idx.head);
  c_index->add_option("--out", idx.out)->required();
  c_index->add_option("--frames", idx.frames);

  QueryOpts q;
  auto* c_query = app.add_subcommand("query", "top-k videos for a query vector or class");
  c_query->add_option("--index", q.index)->required()->check(CLI::ExistingFile);
  auto* q_vec = c_query->add_option("--vector", q.vector, "comma-separated floats");
  auto* q_file = c_query->add_option("--vector-file", q.vector_file, "rank-1 VEMB file")->check(CLI::ExistingFile);
  auto* q_cls = c_query->add_option("--class", q.cls, "class name resolved through --data prototypes");
  c_query->add_option("--data", q.data)->check(CLI::ExistingFile);
  c_query->add_option("-k,--k", q.k)->check(CLI::PositiveNumber);
  q_vec->excludes(q_file)->excludes(q_cls);
  q_file->excludes(q_cls);

  ProjectOpts pr;
  auto* c_project = app.add_subcommand("project", "2-D PCA projection and frame clustering");
  c_project->add_option("--data", pr.data)->required()->check(CLI::ExistingFile);
  c_project->add_option("--level", pr.level, "frames | videos")->check(CLI::IsMember({"frames", "videos"}));
  add_head_options(c_project, pr.head);
  c_project->add_option("--out", pr.out, "points CSV")->required();
  c_project->add_option("--frames", pr.frames);

  GradcheckOpts gc;
  auto* c_grad = app.add_subcommand("gradcheck", "finite-difference check of a head's gradients");
  c_grad->add_option("--head", gc.head)->check(CLI::IsMember({"lstm", "transformer"}));
  c_grad->add_option("--frames", gc.frames);
  c_grad->add_option("--dim", gc.dim);
  c_grad->add_option("--layers", gc.layers);
  c_grad->add_option("--heads", gc.heads);
  c_grad->add_option("--step", gc.step);
  c_grad->add_option("--tol", gc.tol);

  ServeOpts sv;
  auto* c_serve = app.add_subcommand("serve", "HTTP query endpoint over an index");
  c_serve->add_option("--index", sv.index)->required()->check(CLI::ExistingFile);
  c_serve->add_option("--data", sv.data, "manifest whose prototypes resolve class queries")->check(CLI::ExistingFile);
  c_serve->add_option("--host", sv.host);
  c_serve->add_option("--port", sv.port)->check(CLI::Range(1, 65535));

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
    if (c_query->parsed() && q.vector.empty() && q.vector_file.empty() && q.cls.empty())
      throw CLI::ValidationError("query needs one of --vector, --vector-file or --class");
    if (c_index->parsed() && idx.data.empty() && idx.embeddings.empty())
      throw CLI::ValidationError("index needs --data or --embeddings");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_gen->parsed()) return cmd_gen(g, gen, out);
    if (c_train->parsed()) return cmd_train(g, tr, out, err);
    if (c_eval->parsed()) return cmd_eval(g, ev, out);
    if (c_encode->parsed()) return cmd_encode(g, enc, out, false);
    if (c_index->parsed()) return cmd_encode(g, idx, out, true);
    if (c_query->parsed()) return cmd_query(q, out);
    if (c_project->parsed()) return cmd_project(g, pr, out);
    if (c_grad->parsed()) return cmd_gradcheck(g, gc, out);
    if (c_serve->parsed()) return cmd_serve(g, sv, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace vidembed::cli
