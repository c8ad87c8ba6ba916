#include "crdnd/evaluation.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace crdnd {

namespace {

std::vector<std::size_t> batch_indices(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  for (std::size_t i = begin; i < end; ++i) idx[i - begin] = i;
  return idx;
}

std::vector<int> predictions(Model<float>& model, const Tensor<float>& images) {
  Tensor<float> logits = model.forward(images, false);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<int> preds(n);
  for (std::size_t i = 0; i < n; ++i)
    preds[i] = static_cast<int>(argmax(logits.data() + i * k, k));
  return preds;
}

}  // namespace

double evaluate_clean(Model<float>& model, const Dataset& dataset, std::size_t batch_size) {
  if (dataset.size() == 0) throw InvalidInputError("evaluate_clean: empty dataset");
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < dataset.size(); begin += batch_size) {
    const std::size_t end = std::min(dataset.size(), begin + batch_size);
    ImageBatch batch = dataset.gather(batch_indices(begin, end));
    auto preds = predictions(model, batch.images);
    for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == batch.labels[i];
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(dataset.size());
}

AttackEval evaluate_under_attack(Model<float>& model, const Dataset& dataset,
                                 const AttackSpec& spec, std::uint64_t seed,
                                 std::size_t batch_size) {
  if (dataset.size() == 0) throw InvalidInputError("evaluate_under_attack: empty dataset");
  spec.validate();
  std::size_t robust = 0, strict = 0, batch_idx = 0;
  for (std::size_t begin = 0; begin < dataset.size(); begin += batch_size, ++batch_idx) {
    const std::size_t end = std::min(dataset.size(), begin + batch_size);
    ImageBatch batch = dataset.gather(batch_indices(begin, end));
    auto clean_preds = predictions(model, batch.images);
    RngStream rng = RngStream::derive(seed, "eval-attack:" + spec.name, batch_idx);
    Tensor<float> xadv = pgd(model, batch.images, batch.labels, nullptr, spec, &rng);
    auto adv_preds = predictions(model, xadv);
    for (std::size_t i = 0; i < adv_preds.size(); ++i) {
      const bool adv_ok = adv_preds[i] == batch.labels[i];
      const bool clean_ok = clean_preds[i] == batch.labels[i];
      robust += adv_ok;
      strict += adv_ok && clean_ok;
    }
  }
  const double denom = static_cast<double>(dataset.size());
  return {100.0 * static_cast<double>(robust) / denom,
          100.0 * static_cast<double>(strict) / denom};
}

void generate_report(const RobustnessReport& report, const std::string& path) {
  if (report.attacks.empty() && report.clean_accuracy == 0.0)
    throw InvalidInputError("report has no evaluation results");
  nlohmann::ordered_json j;
  j["schema_version"] = RobustnessReport::kSchemaVersion;
  j["model_id"] = report.model_id;
  j["dataset_id"] = report.dataset_id;
  j["seed"] = report.seed;
  j["deterministic"] = report.deterministic;
  j["timestamp"] = report.timestamp;
  j["clean_accuracy"] = report.clean_accuracy;
  nlohmann::ordered_json attacks = nlohmann::ordered_json::object();
  for (const auto& a : report.attacks) {
    nlohmann::ordered_json e;
    e["epsilon"] = a.spec.epsilon;
    e["steps"] = a.spec.steps;
    e["step_size"] = a.spec.step_size;
    e["objective"] = to_string(a.spec.objective);
    e["random_start"] = a.spec.random_start;
    e["robust_accuracy"] = a.eval.robust_accuracy;
    e["strict_robust_accuracy"] = a.eval.strict_robust_accuracy;
    attacks[a.spec.name] = e;
  }
  j["attacks"] = attacks;

  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot write report to '" + path + "'");
  out << j.dump(2) << "\n";
}

RobustnessReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open report '" + path + "'");
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError("report '" + path + "' is not valid JSON: " + e.what());
  }
  for (const char* key : {"schema_version", "model_id", "dataset_id", "seed", "deterministic",
                          "timestamp", "clean_accuracy", "attacks"})
    if (!j.contains(key))
      throw InvalidInputError("report '" + path + "' is missing field '" + key + "'");
  if (j["schema_version"].get<int>() != RobustnessReport::kSchemaVersion)
    throw InvalidInputError("unsupported report schema version");

  RobustnessReport r;
  r.model_id = j["model_id"].get<std::string>();
  r.dataset_id = j["dataset_id"].get<std::string>();
  r.seed = j["seed"].get<std::uint64_t>();
  r.deterministic = j["deterministic"].get<bool>();
  r.timestamp = j["timestamp"].get<std::string>();
  r.clean_accuracy = j["clean_accuracy"].get<double>();
  for (auto& [name, e] : j["attacks"].items()) {
    for (const char* key : {"epsilon", "steps", "step_size", "objective", "random_start",
                            "robust_accuracy", "strict_robust_accuracy"})
      if (!e.contains(key))
        throw InvalidInputError("attack entry '" + name + "' is missing field '" + key + "'");
    AttackReportEntry entry;
    entry.spec.name = name;
    entry.spec.epsilon = e["epsilon"].get<double>();
    entry.spec.steps = e["steps"].get<int>();
    entry.spec.step_size = e["step_size"].get<double>();
    entry.spec.objective = e["objective"].get<std::string>() == "kl-vs-teacher"
                               ? AttackObjective::kl_vs_teacher
                               : AttackObjective::cross_entropy_vs_label;
    entry.spec.random_start = e["random_start"].get<bool>();
    entry.eval.robust_accuracy = e["robust_accuracy"].get<double>();
    entry.eval.strict_robust_accuracy = e["strict_robust_accuracy"].get<double>();
    r.attacks.push_back(entry);
  }
  return r;
}

std::string report_csv_rows(const RobustnessReport& report) {
  std::ostringstream os;
  os << report.model_id << "," << report.dataset_id << ",clean,," << report.clean_accuracy
     << ",\n";
  for (const auto& a : report.attacks)
    os << report.model_id << "," << report.dataset_id << "," << a.spec.name << ","
       << a.spec.epsilon << "," << a.eval.robust_accuracy << ","
       << a.eval.strict_robust_accuracy << "\n";
  return os.str();
}

}  // namespace crdnd
