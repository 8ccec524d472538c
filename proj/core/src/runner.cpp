#include "vfss/runner.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "vfss/dataset.hpp"
#include "vfss/error.hpp"
#include "vfss/parallel.hpp"

namespace vfss {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr double kThresholdClampSlack = 1e-6;

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

std::string drop_mode_name(DropMode m) { return m == DropMode::kBernoulli ? "bernoulli" : "fixed"; }

DropMode parse_drop_mode(const std::string& s) {
  if (s == "bernoulli") return DropMode::kBernoulli;
  if (s == "fixed") return DropMode::kFixedCount;
  throw Error(ErrorKind::kConfig, "drop_mode must be 'bernoulli' or 'fixed', got '" + s + "'");
}

AssignmentMode parse_mode(const std::string& s) {
  if (s == "hard") return AssignmentMode::kHard;
  if (s == "soft") return AssignmentMode::kSoft;
  throw Error(ErrorKind::kConfig, "mode must be 'hard' or 'soft', got '" + s + "'");
}

// Image ids may contain path separators; keep file names flat.
std::string file_stem_for(const std::string& image_id) {
  std::string s = image_id;
  for (char& c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    if (!ok) c = '_';
  }
  return s;
}

AggregationWeights resolve_weights(const RunConfig& cfg, std::size_t embed_dim) {
  if (cfg.weights) {
    auto w = read_weights(*cfg.weights);
    if (w.iterations() > 0 && w.embed_dim != embed_dim) {
      throw Error(ErrorKind::kDimensionMismatch, "weights embed_dim " + std::to_string(w.embed_dim) +
                                                     " != embedding dim " + std::to_string(embed_dim));
    }
    return w;
  }
  return AggregationWeights::initialize(cfg.seed, cfg.iterations, embed_dim, cfg.guidance_dim);
}

json iou_json(const std::vector<std::string>& names, const IouResult& r) {
  json per_class = json::array();
  for (std::size_t c = 0; c < names.size(); ++c) {
    per_class.push_back({{"class", names[c]}, {"iou", r.per_class[c] ? json(*r.per_class[c]) : json(nullptr)}});
  }
  return {{"miou", r.miou}, {"scored_classes", r.scored_classes}, {"per_class", std::move(per_class)}};
}

json assignments_json(const std::map<std::string, AssignmentMap>& maps) {
  json doc = json::object();
  for (const auto& [id, m] : maps) doc[id] = m.to_json();
  return doc;
}

std::vector<Prediction> load_predictions_for(const RunConfig& cfg) {
  return read_predictions(cfg.predictions ? *cfg.predictions : predictions_index_path(cfg));
}

void report_errors(std::ostream& err, const std::vector<std::string>& ids, const std::vector<std::string>& messages) {
  err << ids.size() << " image(s) failed:\n";
  for (std::size_t k = 0; k < ids.size(); ++k) err << "  " << ids[k] << ": " << messages[k] << "\n";
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

RunConfig RunConfig::defaults() {
  RunConfig c;
  for (int k = 0; k <= 10; ++k) c.thresholds.push_back(k / 10.0);
  for (int k = 0; k <= 9; ++k) c.drop_rates.push_back(k / 10.0);
  c.fp_counts = {0, 1, 2, 4, 8};
  return c;
}

RunConfig RunConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::kConfig, "config must be a JSON object");
  RunConfig c = defaults();
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "manifest") {
        c.manifest = value.get<std::string>();
      } else if (key == "weights") {
        if (!value.is_null()) c.weights = value.get<std::string>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "iterations") {
        c.iterations = value.get<std::size_t>();
      } else if (key == "guidance_dim") {
        c.guidance_dim = value.get<std::size_t>();
      } else if (key == "tagger") {
        c.set_tagger(value.get<std::string>());
      } else if (key == "tsbert") {
        c.tsbert = value.get<double>();
      } else if (key == "mode") {
        c.mode = parse_mode(value.get<std::string>());
      } else if (key == "out") {
        c.out = value.get<std::string>();
      } else if (key == "predictions") {
        if (!value.is_null()) c.predictions = value.get<std::string>();
      } else if (key == "threads") {
        c.threads = value.get<unsigned>();
      } else if (key == "thresholds") {
        c.thresholds = value.get<std::vector<double>>();
      } else if (key == "drop_rates") {
        c.drop_rates = value.get<std::vector<double>>();
      } else if (key == "fp_counts") {
        c.fp_counts = value.get<std::vector<std::size_t>>();
      } else if (key == "drop_mode") {
        c.drop_mode = parse_drop_mode(value.get<std::string>());
      } else if (key == "macro_acc") {
        c.macro_acc = value.get<bool>();
      } else {
        throw Error(ErrorKind::kConfig, "unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  try {
    return from_json(json::parse(read_text_file(path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

void RunConfig::set_tagger(const std::string& source) {
  if (source == "oracle") {
    tagger = TaggerSource::kOracle;
    tag_file.reset();
  } else if (source == "perturb") {
    tagger = TaggerSource::kPerturb;
    tag_file.reset();
  } else if (source == "file") {
    tagger = TaggerSource::kFile;
    tag_file.reset();
  } else if (source.starts_with("file:") && source.size() > 5) {
    tagger = TaggerSource::kFile;
    tag_file = source.substr(5);
  } else {
    throw Error(ErrorKind::kConfig, "tagger must be oracle, file, file:PATH or perturb; got '" + source + "'");
  }
}

std::string RunConfig::tagger_spec() const {
  switch (tagger) {
    case TaggerSource::kOracle: return "oracle";
    case TaggerSource::kPerturb: return "perturb";
    case TaggerSource::kFile: return tag_file ? "file:" + tag_file->string() : "file";
  }
  return "oracle";
}

void RunConfig::validate() const {
  if (manifest.empty()) throw Error(ErrorKind::kConfig, "no manifest given");
  if (!(tsbert >= 0.0 && tsbert <= 1.0)) throw Error(ErrorKind::kConfig, "tsbert must lie in [0, 1]");
  if (threads == 0) throw Error(ErrorKind::kConfig, "threads must be >= 1");
  if (!weights && iterations > 0 && guidance_dim == 0) {
    throw Error(ErrorKind::kConfig, "guidance_dim must be positive when iterations > 0");
  }
  for (double r : drop_rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorKind::kConfig, "drop rates must lie in [0, 1]");
  }
}

json RunConfig::echo() const {
  json doc;
  doc["manifest"] = manifest.string();
  doc["weights"] = weights ? json(weights->string()) : json(nullptr);
  doc["seed"] = seed;
  if (!weights) {
    doc["iterations"] = iterations;
    doc["guidance_dim"] = guidance_dim;
  }
  doc["tagger"] = tagger_spec();
  doc["tsbert"] = tsbert;
  doc["mode"] = std::string(to_string(mode));
  doc["thresholds"] = thresholds;
  doc["drop_rates"] = drop_rates;
  doc["fp_counts"] = fp_counts;
  doc["drop_mode"] = drop_mode_name(drop_mode);
  doc["macro_acc"] = macro_acc;
  return doc;
}

fs::path predictions_index_path(const RunConfig& cfg) { return cfg.out / "predictions.json"; }
fs::path report_path(const RunConfig& cfg) { return cfg.out / "report.json"; }

std::vector<Prediction> read_predictions(const fs::path& index_path) {
  json doc;
  try {
    doc = json::parse(read_text_file(index_path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, index_path.string() + ": " + e.what());
  }
  std::vector<Prediction> out;
  try {
    for (const auto& item : doc.at("images")) {
      Prediction p;
      p.image_id = item.at("image_id").get<std::string>();
      p.classes = item.at("classes").get<std::vector<std::string>>();
      p.map = read_segmap(index_path.parent_path() / item.at("map").get<std::string>());
      p.map.check_labels(p.classes.size());
      out.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, index_path.string() + ": " + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_segment(const RunConfig& cfg, std::ostream& err) {
  return guarded(err, [&] {
    cfg.validate();
    const auto manifest = load_manifest(cfg.manifest);
    const auto dataset = Dataset::load(manifest);
    const auto weights = resolve_weights(cfg, dataset.text_bank().dim());
    const auto& images = dataset.images();

    std::optional<TagFile> shared_tags;
    if (cfg.tagger == TaggerSource::kFile && cfg.tag_file) shared_tags = read_tag_file(*cfg.tag_file);

    PerturbationConfig perturb;
    perturb.drop_rate = cfg.drop_rates.empty() ? 0.0 : cfg.drop_rates.front();
    perturb.fp_count = cfg.fp_counts.empty() ? 0 : cfg.fp_counts.front();
    perturb.master_seed = cfg.seed;
    perturb.vocabulary = dataset.vocabulary();
    perturb.drop_mode = cfg.drop_mode;

    const fs::path pred_dir = cfg.out / "predictions";
    fs::create_directories(pred_dir);

    std::vector<std::string> stems;
    std::set<std::string> seen_stems;
    for (const auto& im : images) {
      auto stem = file_stem_for(im.image_id);
      if (!seen_stems.insert(stem).second) {
        throw Error(ErrorKind::kDuplicate, "image ids collide after file-name sanitising: '" + im.image_id + "'");
      }
      stems.push_back(std::move(stem));
    }

    std::vector<std::vector<std::string>> classes(images.size());
    std::vector<std::optional<std::string>> failures(images.size());
    parallel_for(images.size(), cfg.threads, [&](std::size_t k) {
      const auto& im = images[k];
      try {
        switch (cfg.tagger) {
          case TaggerSource::kOracle:
            classes[k] = oracle_tags(im.gt, dataset.vocabulary());
            break;
          case TaggerSource::kPerturb:
            classes[k] = perturb_tags(oracle_tags(im.gt, dataset.vocabulary()), perturb, im.image_id).tags();
            break;
          case TaggerSource::kFile: {
            const std::vector<std::string>* tags = nullptr;
            if (shared_tags) {
              if (auto it = shared_tags->tags.find(im.image_id); it != shared_tags->tags.end()) tags = &it->second;
            } else if (im.file_tags) {
              tags = &*im.file_tags;
            }
            if (tags == nullptr) throw Error(ErrorKind::kMissingTags, "tag file has no entry for this image");
            classes[k] = *tags;
            break;
          }
        }
        const auto map = segment_image(im.embedding, classes[k], dataset.text_bank(), weights, im.gt.height,
                                       im.gt.width);
        write_segmap(map, pred_dir / (stems[k] + ".segm"));
      } catch (const std::exception& e) {
        failures[k] = e.what();
      }
    });

    std::vector<std::string> failed_ids;
    std::vector<std::string> messages;
    for (std::size_t k = 0; k < images.size(); ++k) {
      if (failures[k]) {
        failed_ids.push_back(images[k].image_id);
        messages.push_back(*failures[k]);
      }
    }
    if (!failed_ids.empty()) {
      report_errors(err, failed_ids, messages);
      return 1;
    }

    json index;
    index["config"] = cfg.echo();
    index["provenance"] = {{"weights", weights.provenance}, {"text_bank", dataset.text_bank().provenance()}};
    json list = json::array();
    for (std::size_t k = 0; k < images.size(); ++k) {
      list.push_back({{"image_id", images[k].image_id},
                      {"classes", classes[k]},
                      {"map", "predictions/" + stems[k] + ".segm"}});
    }
    index["images"] = std::move(list);
    write_text_file(dump(index), predictions_index_path(cfg));
    return 0;
  });
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& err) {
  return guarded(err, [&] {
    cfg.validate();
    const auto dataset = Dataset::load(load_manifest(cfg.manifest));
    const auto predictions = load_predictions_for(cfg);
    const auto result = evaluate_predictions(dataset, predictions, cfg.tsbert, cfg.threads);
    const auto& vocab = dataset.vocabulary();

    const fs::path index = cfg.predictions ? *cfg.predictions : predictions_index_path(cfg);
    json segment_config = nullptr;
    try {
      segment_config = json::parse(read_text_file(index)).value("config", json(nullptr));
    } catch (const json::exception&) {
    }

    json report;
    report["config"] = cfg.echo();
    report["segment_config"] = std::move(segment_config);
    report["provenance"] = {{"text_bank", dataset.text_bank().provenance()},
                            {"sentence_bank", dataset.sentence_bank().provenance()}};
    report["images"] = dataset.images().size();
    report["vocabulary_size"] = vocab.size();
    report["miou"] = cfg.mode == AssignmentMode::kSoft ? result.soft.miou : result.hard.miou;
    report["hard"] = iou_json(vocab, result.hard);
    report["soft"] = iou_json(vocab, result.soft);
    report["tagging"] = {{"hard", result.hard_tagging.to_json(cfg.macro_acc)},
                         {"soft", result.soft_tagging.to_json(cfg.macro_acc)}};
    report["assignments"] = {{"hard", assignments_json(result.hard_assignments)},
                             {"soft", assignments_json(result.soft_assignments)}};

    fs::create_directories(cfg.out);
    write_text_file(dump(report), report_path(cfg));
    write_text_file(per_class_csv(vocab, result.soft), cfg.out / "per_class_iou.csv");
    write_text_file(per_class_csv(vocab, result.hard), cfg.out / "per_class_iou_hard.csv");
    return 0;
  });
}

std::vector<ThresholdRow> sweep_thresholds(const Dataset& dataset, std::span<const Prediction> predictions,
                                           std::span<const double> thresholds, unsigned threads) {
  std::vector<ThresholdRow> rows;
  rows.reserve(thresholds.size());
  for (double t : thresholds) {
    if (t > 1.0 && t <= 1.0 + kThresholdClampSlack) t = 1.0;
    if (!(t >= 0.0 && t <= 1.0)) {
      throw Error(ErrorKind::kOutOfRange, fmt::format("threshold {} outside [0, 1]", t));
    }
    const auto eval = evaluate_predictions(dataset, predictions, t, threads);
    std::size_t matched = 0;
    for (const auto& [id, m] : eval.soft_assignments) matched += m.matched_count();
    rows.push_back({t, eval.soft.miou, matched});
  }
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rows[a].threshold < rows[b].threshold; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& lo = rows[order[k - 1]];
    const auto& hi = rows[order[k]];
    if (hi.matched_names > lo.matched_names) {
      throw Error(ErrorKind::kMonotonicity,
                  fmt::format("matched names rose from {} at T={} to {} at T={}", lo.matched_names, lo.threshold,
                              hi.matched_names, hi.threshold));
    }
  }
  return rows;
}

std::string threshold_csv(std::span<const ThresholdRow> rows) {
  std::string out = "threshold,soft_miou,matched_names\n";
  for (const auto& r : rows) out += fmt::format("{:.4f},{:.6f},{}\n", r.threshold, r.soft_miou, r.matched_names);
  return out;
}

int cmd_sweep_threshold(const RunConfig& cfg, std::ostream& err) {
  return guarded(err, [&] {
    cfg.validate();
    if (cfg.thresholds.empty()) throw Error(ErrorKind::kConfig, "no thresholds given");
    const auto dataset = Dataset::load(load_manifest(cfg.manifest));
    const auto predictions = load_predictions_for(cfg);
    const auto rows = sweep_thresholds(dataset, predictions, cfg.thresholds, cfg.threads);
    fs::create_directories(cfg.out);
    write_text_file(threshold_csv(rows), cfg.out / "threshold_sweep.csv");
    return 0;
  });
}

int cmd_simulate(const RunConfig& cfg, std::ostream& err) {
  return guarded(err, [&] {
    cfg.validate();
    if (cfg.drop_rates.empty() || cfg.fp_counts.empty()) {
      throw Error(ErrorKind::kConfig, "simulate needs at least one drop rate and one fp count");
    }
    const auto dataset = Dataset::load(load_manifest(cfg.manifest));
    const auto weights = resolve_weights(cfg, dataset.text_bank().dim());
    std::vector<GridPoint> grid;
    for (double r : cfg.drop_rates) {
      for (auto fp : cfg.fp_counts) grid.push_back({r, fp});
    }
    PerturbationConfig base;
    base.master_seed = cfg.seed;
    base.vocabulary = dataset.vocabulary();
    base.drop_mode = cfg.drop_mode;
    const auto rows = sweep_perturbation(dataset, grid, base, weights, cfg.tsbert, cfg.threads);
    fs::create_directories(cfg.out);
    write_text_file(sweep_csv(rows, cfg.seed), cfg.out / "perturbation_sweep.csv");
    return 0;
  });
}

int cmd_validate(std::span<const fs::path> paths, std::optional<std::size_t> class_count, std::ostream& out,
                 std::ostream& err) {
  int failures = 0;
  for (const auto& path : paths) {
    try {
      const auto bytes = read_file_bytes(path);
      auto starts_with = [&](std::string_view magic) {
        return bytes.size() >= 4 && std::equal(magic.begin(), magic.end(), bytes.begin(),
                                               [](char a, std::byte b) { return static_cast<std::byte>(a) == b; });
      };
      if (starts_with("VFSE")) {
        const auto c = decode_embedding(bytes);
        if (c.rank() == 3) {
          DenseImageEmbedding::from_container(c);
        } else {
          std::vector<std::string> names(c.dims[0]);
          for (std::size_t k = 0; k < names.size(); ++k) names[k] = std::to_string(k);
          TextEmbeddingSet::from_container(std::move(names), c);
        }
        std::string dims;
        for (auto d : c.dims) dims += (dims.empty() ? "" : "x") + std::to_string(d);
        out << "OK " << path.string() << " VFSE dims=" << dims << " provenance=\"" << c.provenance << "\"\n";
      } else if (starts_with("SEGM")) {
        const auto m = decode_segmap(bytes);
        if (class_count) m.check_labels(*class_count);
        out << "OK " << path.string() << " SEGM " << m.height << "x" << m.width << "\n";
      } else if (starts_with("VFSW")) {
        const auto w = decode_weights(bytes);
        out << "OK " << path.string() << " VFSW K=" << w.iterations() << " d=" << w.embed_dim
            << " g=" << w.guidance_dim << "\n";
      } else if (path.extension() == ".json") {
        const std::string text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        json doc;
        try {
          doc = json::parse(text);
        } catch (const json::parse_error& e) {
          throw Error(ErrorKind::kParse, e.what());
        }
        if (doc.is_object() && doc.contains("entries")) {
          const auto m = load_manifest(path);
          out << "OK " << path.string() << " manifest entries=" << m.entries.size()
              << " vocabulary=" << m.vocabulary.size() << "\n";
        } else {
          const auto t = parse_tag_file(text);
          out << "OK " << path.string() << " tags images=" << t.tags.size() << "\n";
        }
      } else if (path.extension() == ".txt") {
        const auto names = parse_name_list(std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
        std::set<std::string> unique(names.begin(), names.end());
        if (unique.size() != names.size()) throw Error(ErrorKind::kDuplicate, "duplicate names");
        out << "OK " << path.string() << " names=" << names.size() << "\n";
      } else {
        throw Error(ErrorKind::kBadMagic, "unrecognised file format");
      }
    } catch (const std::exception& e) {
      ++failures;
      err << "FAIL " << path.string() << ": " << e.what() << "\n";
    }
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace vfss
