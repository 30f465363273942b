#pragma once

// HTTP recommendation service over one checkpoint + vocabulary.
//
//   POST /v1/recommend   {"metamodel": {...}, "target": {...}, "k": 5, "strategy": "global"}
//   GET  /v1/health      {"status": "loading" | "ready"}
//   GET  /v1/model/info  {"checkpoint_sha256", "preset", "vocab_size", ...}
//
// A target is either an existing element
//   {"kind": "attribute", "class": "State", "name": "isFinal"}
//   {"kind": "attribute", "class_index": 1, "member_index": 0}
// or a pending slot for an element being created
//   {"pending": true, "kind": "class"}
//   {"pending": true, "kind": "attribute", "class": "State", "type": "EBoolean"}
//   {"pending": true, "kind": "association", "class": "Transition", "target": "State"}

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <json.hpp>

#include "mmconcept/bpe.hpp"
#include "mmconcept/digest.hpp"
#include "mmconcept/metamodel.hpp"
#include "mmconcept/nn/checkpoint.hpp"
#include "mmconcept/recommend.hpp"
#include "mmconcept/sampler.hpp"
#include "mmconcept/tree.hpp"

// Last: <resolv.h>, pulled in by httplib, defines a `_res` macro that breaks Eigen.
#include <httplib.h>

namespace mmconcept {

struct LoadedModel {
  nn::MaskedLM<float> model;
  Vocabulary vocab;
  std::string checkpoint_sha256;
  std::size_t best_epoch = 0;
};

inline std::shared_ptr<const LoadedModel> load_model(const std::filesystem::path& checkpoint,
                                                     const std::filesystem::path& vocab) {
  const auto ckpt = nn::load_checkpoint(checkpoint);
  std::ifstream in(vocab, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocabulary " + vocab.string());
  auto v = Vocabulary::from_json(nlohmann::json::parse(in));
  if (v.size() != ckpt.config.vocab_size) throw std::runtime_error("vocabulary size does not match the checkpoint");
  return std::make_shared<const LoadedModel>(
      LoadedModel{nn::model_from_checkpoint<float>(ckpt), std::move(v), file_sha256(checkpoint), ckpt.best_epoch});
}

struct HttpResponse {
  int status = 200;
  std::string body;
};

inline constexpr std::size_t kMaxRecommendK = 50;

class RecommendService {
 public:
  explicit RecommendService(FillMaskOptions opts = {}) : opts_(opts) {}

  void set_model(std::shared_ptr<const LoadedModel> m) {
    std::lock_guard lock(mu_);
    model_ = std::move(m);
  }

  std::shared_ptr<const LoadedModel> model() const {
    std::lock_guard lock(mu_);
    return model_;
  }

  HttpResponse handle_health() const {
    return {200, nlohmann::json{{"status", model() ? "ready" : "loading"}}.dump()};
  }

  HttpResponse handle_model_info() const {
    const auto m = model();
    if (!m) return error(503, "model-not-loaded", "model is still loading");
    return {200, info_json(*m).dump()};
  }

  HttpResponse handle_recommend(const std::string& body) const {
    const auto loaded = model();
    if (!loaded) return error(503, "model-not-loaded", "model is still loading");

    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const std::exception& e) {
      return error(400, "bad-request", std::string("malformed JSON: ") + e.what());
    }
    if (!req.is_object()) return error(400, "bad-request", "request must be a JSON object");

    Metamodel m;
    std::size_t k = 5;
    Strategy strategy = Strategy::Global;
    try {
      m = metamodel_from_json(req.at("metamodel"));
      if (req.contains("k")) {
        const auto& jk = req.at("k");
        if (!jk.is_number_integer() || jk.get<long long>() < 1 || jk.get<long long>() > static_cast<long long>(kMaxRecommendK))
          throw std::invalid_argument("k must be an integer in [1, 50]");
        k = jk.get<std::size_t>();
      }
      if (req.contains("strategy")) {
        strategy = strategy_from_string(req.at("strategy").get<std::string>());
        if (strategy == Strategy::Incremental) throw std::invalid_argument("strategy must be global or local");
      }
      if (!req.contains("target") || !req.at("target").is_object()) throw std::invalid_argument("missing target");
    } catch (const std::exception& e) {
      return error(400, "bad-request", e.what());
    }

    SamplePlan plan;
    try {
      auto resolved = resolve_target(m, req.at("target"));
      if (!resolved) return error(422, "unresolvable-target", "target does not resolve in the metamodel");
      plan = std::move(*resolved);
    } catch (const std::exception& e) {
      return error(400, "bad-request", e.what());
    }
    if (strategy == Strategy::Local) plan.selection = local_selection(m, plan.target);

    const auto masked = mask_element(m, plan.target, plan.selection);
    nlohmann::ordered_json out;
    out["candidates"] = nlohmann::ordered_json::array();
    for (const auto& c : fill_mask_topk(loaded->model, loaded->vocab, masked.context, k, opts_))
      out["candidates"].push_back({{"text", c.text}, {"score", c.score}});
    out["context_size"] = plan.selection.element_count() - 1;
    out["model_info"] = {{"checkpoint_sha256", loaded->checkpoint_sha256},
                         {"preset", loaded->model.config().preset}};
    return {200, out.dump()};
  }

  /// Registers the routes on `server`, with CORS headers for `origin`.
  void bind(httplib::Server& server, std::string origin = "*") const {
    server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    auto reply = [](httplib::Response& res, const HttpResponse& r) {
      res.status = r.status;
      res.set_content(r.body, "application/json");
    };
    server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Get("/v1/health", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, handle_health()); });
    server.Get("/v1/model/info",
               [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, handle_model_info()); });
    server.Post("/v1/recommend", [this, reply](const httplib::Request& req, httplib::Response& res) {
      reply(res, handle_recommend(req.body));
    });
  }

 private:
  static HttpResponse error(int status, const std::string& code, const std::string& message) {
    return {status, nlohmann::json{{"error", code}, {"message", message}}.dump()};
  }

  static nlohmann::ordered_json info_json(const LoadedModel& m) {
    nlohmann::ordered_json j;
    j["checkpoint_sha256"] = m.checkpoint_sha256;
    j["preset"] = m.model.config().preset;
    j["vocab_size"] = m.vocab.size();
    j["parameters"] = m.model.parameter_count();
    j["max_sequence_length"] = m.model.config().max_sequence_length;
    j["best_epoch"] = m.best_epoch;
    return j;
  }

  static Selection local_selection(const Metamodel& m, const ElementRef& ref) {
    Selection sel = Selection::none(m);
    sel.set_class_subtree(ref.class_index);
    for (std::size_t n : linked_classes(m, ref.class_index)) sel.set_class_subtree(n);
    return sel;
  }

  static std::string placeholder(const Metamodel& m) {
    std::string name = "pending";
    auto used = [&](const std::string& s) {
      bool hit = false;
      for_each_identifier(m, [&](const std::string& id) { hit = hit || id == s; });
      return hit;
    };
    while (used(name)) name += "_";
    return name;
  }

  static std::optional<std::size_t> class_ref(const Metamodel& m, const nlohmann::json& t) {
    if (t.contains("class_index")) {
      const auto i = t.at("class_index").get<std::size_t>();
      if (i >= m.classes.size()) return std::nullopt;
      return i;
    }
    if (!t.contains("class")) throw std::invalid_argument("target needs 'class' or 'class_index'");
    const std::size_t i = m.find_class(t.at("class").get<std::string>());
    if (i >= m.classes.size()) return std::nullopt;
    return i;
  }

  // Existing element, or a pending element appended to `m` (which is then
  // modified). Pending slots see every existing element as context.
  static std::optional<SamplePlan> resolve_target(Metamodel& m, const nlohmann::json& t) {
    const ElementKind kind = element_kind_from_string(t.at("kind").get<std::string>());
    if (t.value("pending", false)) {
      const std::string name = placeholder(m);
      ElementRef ref{kind, 0, 0};
      if (kind == ElementKind::Class) {
        m.classes.push_back(ClassDef{name, {}, {}});
        ref.class_index = m.classes.size() - 1;
      } else {
        auto c = class_ref(m, t);
        if (!c) return std::nullopt;
        ref.class_index = *c;
        auto& cls = m.classes[*c];
        if (kind == ElementKind::Attribute) {
          const std::string type = t.value("type", "EString");
          if (!is_valid_identifier(type)) throw std::invalid_argument("invalid attribute type");
          cls.attributes.push_back({name, type});
          ref.member_index = cls.attributes.size() - 1;
        } else {
          if (!t.contains("target")) throw std::invalid_argument("pending association needs 'target'");
          const std::string target = t.at("target").get<std::string>();
          if (m.find_class(target) >= m.classes.size()) return std::nullopt;
          cls.associations.push_back({name, target, false});
          ref.member_index = cls.associations.size() - 1;
        }
      }
      return SamplePlan{ref, Selection::all(m)};
    }

    auto c = class_ref(m, t);
    if (!c) return std::nullopt;
    ElementRef ref{kind, *c, 0};
    if (kind != ElementKind::Class) {
      const auto& cls = m.classes[*c];
      if (t.contains("member_index")) {
        ref.member_index = t.at("member_index").get<std::size_t>();
      } else {
        if (!t.contains("name")) throw std::invalid_argument("target needs 'name' or 'member_index'");
        const std::string name = t.at("name").get<std::string>();
        ref.member_index = std::numeric_limits<std::size_t>::max();
        if (kind == ElementKind::Attribute) {
          for (std::size_t j = 0; j < cls.attributes.size(); ++j)
            if (cls.attributes[j].name == name && ref.member_index > j) ref.member_index = j;
        } else {
          for (std::size_t j = 0; j < cls.associations.size(); ++j)
            if (cls.associations[j].name == name && ref.member_index > j) ref.member_index = j;
        }
      }
    }
    if (!resolves(m, ref)) return std::nullopt;
    return SamplePlan{ref, Selection::all(m)};
  }

  FillMaskOptions opts_;
  mutable std::mutex mu_;
  std::shared_ptr<const LoadedModel> model_;
};

}  // namespace mmconcept
