#include <algorithm>
#include <set>
#include <sstream>

#include "doctest.h"
#include "gradcheck.hpp"
#include "model_fixtures.hpp"
#include "readnet/harness.hpp"

using namespace readnet;
using namespace readnet::harness;
using testing::lexicons;

namespace {

Corpus parse(const std::string& text, std::optional<std::size_t> m = std::nullopt) {
  std::istringstream in(text);
  return parse_corpus(in, "mem", m);
}

double mean_fkgl(const Corpus& c, int level) {
  double total = 0.0;
  int n = 0;
  for (const auto& d : c.documents) {
    if (d.label != level) continue;
    total += document_features(tokenize_document(d, lexicons()), lexicons())[1];
    ++n;
  }
  return total / n;
}

}  // namespace

TEST_CASE("corpus loading") {
  CHECK_THROWS_WITH(parse(""), "empty corpus");
  const auto c = parse(
      "{\"id\":\"a\",\"text\":\"One.\",\"label\":1}\n"
      "\n"
      "{\"id\":\"b\",\"text\":\"Two.\",\"label\":2}\n"
      "{\"id\":\"c\",\"text\":\"Three.\"}\n");
  CHECK(c.documents.size() == 3);
  CHECK(c.class_count == 2);
  CHECK_FALSE(c.documents[2].label.has_value());

  CHECK_THROWS_WITH(parse("{\"id\":\"a\",\"text\":\"x\",\"label\":1}\n{\"id\":\"b\",\"text\":\"y\",\"label\":6}\n", 5),
                    "mem:2: label 6 outside [1, 5]");
  CHECK_THROWS_WITH(parse("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n"), "mem:2: duplicate id 'a'");
  CHECK_THROWS_AS(parse("{\"id\":\"a\",\"text\":\"x\"}\nnot json\n"), std::runtime_error);
  CHECK_THROWS_AS(parse("{\"id\":1,\"text\":\"x\"}\n"), std::runtime_error);

  std::ostringstream out;
  write_corpus(out, c);
  const auto back = parse(out.str());
  REQUIRE(back.documents.size() == 3);
  CHECK(back.documents[1].text == "Two.");
  CHECK(back.documents[1].label == 2);
}

TEST_CASE("kfold plans") {
  const auto corpus = make_synthetic_corpus(2, 5, 1);
  const auto plan = kfold(corpus, 5, 3);
  std::set<std::size_t> seen;
  for (const auto& f : plan.folds) {
    CHECK(f.size() == 2);
    for (auto i : f) CHECK(seen.insert(i).second);
  }
  CHECK(seen.size() == 10);
  CHECK(kfold(corpus, 5, 3).folds == plan.folds);
  CHECK_FALSE(kfold(corpus, 5, 4).folds == plan.folds);
  CHECK_THROWS_AS(kfold(corpus, 11, 3), std::invalid_argument);
  CHECK_THROWS_AS(kfold(corpus, 1, 3), std::invalid_argument);

  const auto uneven = make_synthetic_corpus(3, 7, 2);
  for (bool stratify : {false, true}) {
    const auto p = kfold(uneven, 4, 9, stratify);
    std::size_t lo = 100, hi = 0, total = 0;
    for (const auto& f : p.folds) {
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
      total += f.size();
    }
    CHECK(hi - lo <= 1);
    CHECK(total == 21);
  }
  const auto strat = kfold(uneven, 7, 9, true);
  for (const auto& f : strat.folds) {
    std::set<int> labels;
    for (auto i : f) labels.insert(*uneven.documents[i].label);
    CHECK(labels.size() == 3);
  }
}

TEST_CASE("synthetic generator") {
  const auto a = make_synthetic_corpus(5, 6, 42);
  const auto b = make_synthetic_corpus(5, 6, 42);
  REQUIRE(a.documents.size() == 30);
  for (std::size_t i = 0; i < a.documents.size(); ++i) {
    CHECK(a.documents[i].text == b.documents[i].text);
    CHECK(a.documents[i].id == b.documents[i].id);
  }
  std::set<int> labels;
  for (const auto& d : a.documents) labels.insert(*d.label);
  CHECK(labels == std::set<int>{1, 2, 3, 4, 5});
  CHECK(mean_fkgl(a, 5) > mean_fkgl(a, 1));
  CHECK(synthetic_parameters(5, 6, 42)["per_level"].size() == 5);
  CHECK_THROWS_AS(make_synthetic_corpus(1, 3, 0), std::invalid_argument);
}

TEST_CASE("logistic baseline") {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  num::Rng rng(4);
  for (int i = 0; i < 40; ++i) {
    const int label = 1 + i % 2;
    x.push_back({rng.uniform(-1, 1) + (label == 2 ? 2.5 : -2.5), rng.uniform(-1, 1)});
    y.push_back(label);
  }
  LogisticModel zero{num::Tensor({2, 3}), num::Tensor({1, 3})};
  for (double p : zero.probabilities(x[0])) CHECK(p == doctest::Approx(1.0 / 3));

  const auto model = logistic_baseline_train(x, y, 2, {});
  CHECK(model.predict(x) == y);
  CHECK_THROWS_AS(logistic_baseline_train(x, std::vector<int>(40, 1), 2, {}), std::invalid_argument);

  const std::vector<int> labels = {1, 3, 2, 3};
  const double err = testing::gradcheck(
      [&](num::Graph&, const std::vector<num::Var>& in) { return logistic_loss(in[0], in[1], in[2], labels); },
      {num::init_uniform({4, 5}, 1.0, rng), num::init_uniform({5, 3}, 1.0, rng), num::init_uniform({1, 3}, 1.0, rng)});
  CHECK(err < 1e-4);
}

TEST_CASE("cross validation") {
  const auto corpus = make_synthetic_corpus(2, 20, 5);
  EvalConfig config;
  config.kind = ModelKind::kLogistic;
  config.seed = 3;
  const auto report = cross_validate(corpus, lexicons(), config);
  CHECK(report.mean >= 0.95);
  std::size_t evaluated = 0;
  for (auto s : report.fold_sizes) evaluated += s;
  CHECK(evaluated == corpus.documents.size());
  CHECK(report.mean >= *std::min_element(report.fold_accuracy.begin(), report.fold_accuracy.end()));
  CHECK(report.mean <= *std::max_element(report.fold_accuracy.begin(), report.fold_accuracy.end()));

  config.jobs = 1;
  const auto serial = cross_validate(corpus, lexicons(), config);
  CHECK(serial.to_json() == report.to_json());

  config.kind = ModelKind::kMajority;
  config.k = 2;
  config.stratify = true;
  const auto chance = cross_validate(corpus, lexicons(), config);
  CHECK(chance.mean == doctest::Approx(0.5));
  CHECK(chance.stddev == 0.0);
  CHECK(chance.to_table().find("mean 0.5000  std 0.0000") != std::string::npos);

  config.kind = ModelKind::kReadNet;
  config.k = 2;
  config.model = ModelConfig::tiny();
  config.model.max_epochs = 3;
  const auto small = make_synthetic_corpus(2, 4, 8);
  const auto r1 = cross_validate(small, lexicons(), config);
  const auto r2 = cross_validate(small, lexicons(), config);
  CHECK(r1.to_json() == r2.to_json());
}

TEST_CASE("scoring requires a binary model and stays in [0, 1]") {
  const auto corpus = make_synthetic_corpus(2, 4, 8);
  const auto docs = tokenize_corpus(corpus, lexicons());
  auto config = ModelConfig::tiny();
  config.max_epochs = 2;
  const auto model = fit_readnet(docs, lexicons(), config);
  const auto report = score_documents(model, corpus.documents, lexicons());
  CHECK(report.scores.size() == 8);
  for (double s : report.scores) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
  CHECK(report.by_group.size() == 2);
  CHECK(report.by_group.at(1).count == 4);

  config.num_classes = 3;
  const auto three = testing::model_for(docs, config);
  CHECK_THROWS_AS(score_documents(three, corpus.documents, lexicons()), std::invalid_argument);
}
