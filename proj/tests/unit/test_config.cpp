#include "doctest.h"

#include "htlab/config.hpp"
#include "htlab/error.hpp"

#include <fstream>
#include <string>

using namespace htlab;
using nlohmann::json;

namespace {

json load_doc(const std::string& name) {
  std::ifstream in(std::string(HTLAB_CONFIG_DIR) + "/" + name);
  REQUIRE(in);
  return json::parse(in);
}

std::string config_message(const json& doc) {
  try {
    parse_config(doc);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
    return e.what();
  }
  FAIL("expected ConfigError");
  return {};
}

}  // namespace

TEST_CASE("shipped configs parse") {
  const auto n2 = parse_config(load_doc("n2.json"));
  CHECK(n2.name == "n2");
  CHECK(n2.mode == Mode::Bound);
  CHECK(n2.network.topology.num_buffers == 2);
  CHECK(n2.r_list == std::vector<double>{10.0, 20.0, 40.0});
  CHECK(n2.replications == 400);
  CHECK(n2.cost.gamma == 1.0);
  CHECK(n2.base_seed == 20240602);
  CHECK_FALSE(n2.lambda.has_value());
  REQUIRE(n2.compare.size() == 1);
  CHECK(n2.compare[0].spec.ranking == std::vector<int>{0, 1});

  const auto n1 = load_config(std::string(HTLAB_CONFIG_DIR) + "/n1.json", false);
  CHECK(n1.network.topology.num_buffers == 1);
}

TEST_CASE("round trip through the canonical document") {
  auto c = parse_config(load_doc("n2.json"));
  c.lambda = Matrix::Ones(1, 2);
  c.cost.p = Vector::Ones(1);
  const json once = to_json(c);
  const auto back = parse_config(once);
  CHECK(to_json(back) == once);
  CHECK(back.lambda->isApprox(Matrix::Ones(1, 2)));
  CHECK(back.compare[0].spec.ranking == c.compare[0].spec.ranking);
  CHECK(once["compare"][0]["ranking"] == json{1, 2});
  CHECK(fnv1a_hex(once.dump()) == fnv1a_hex(to_json(back).dump()));
}

TEST_CASE("missing and invalid keys name the offending key") {
  json doc = load_doc("n2.json");
  doc["cost"].erase("gamma");
  CHECK(config_message(doc).find("cost.gamma required") != std::string::npos);

  doc = load_doc("n2.json");
  doc["cost"]["gamma"] = 0.0;
  CHECK(config_message(doc).find("cost.gamma") != std::string::npos);

  doc = load_doc("n2.json");
  doc["r_list"] = json{20, 10};
  CHECK(config_message(doc).find("r_list") != std::string::npos);
  doc["r_list"] = json::array();
  CHECK(config_message(doc).find("r_list") != std::string::npos);
  doc["r_list"] = json{0, 10};
  CHECK(config_message(doc).find("r_list") != std::string::npos);

  doc = load_doc("n2.json");
  doc["policy"] = json{{"type", "static_priority"}, {"ranking", {0, 1}}};
  CHECK(config_message(doc).find("policy.ranking") != std::string::npos);

  doc = load_doc("n2.json");
  doc["replications"] = 1;
  CHECK(config_message(doc).find("replications") != std::string::npos);

  doc = load_doc("n2.json");
  doc["cost"]["h"] = json{1.0};
  CHECK(config_message(doc).find("cost.h") != std::string::npos);

  doc = load_doc("n2.json");
  doc["network"].erase("service");
  CHECK(config_message(doc).find("network.service required") != std::string::npos);

  doc = load_doc("n2.json");
  doc["mode"] = "fly";
  CHECK_THROWS_AS(parse_config(doc), Error);

  CHECK_THROWS_AS(load_config("/nonexistent/config.json", false), Error);
}

TEST_CASE("environment overrides") {
  json doc = load_doc("n2.json");
  apply_overrides(doc, {{"HTLAB_COST__GAMMA", "2.5"},
                        {"HTLAB_NAME", "renamed"},
                        {"HTLAB_R_LIST", "[5, 50]"},
                        {"HTLAB_SEEDS__BASE", "7"},
                        {"OTHER_COST__GAMMA", "9"}});
  CHECK(doc["cost"]["gamma"] == 2.5);
  CHECK(doc["name"] == "renamed");
  const auto c = parse_config(doc);
  CHECK(c.cost.gamma == 2.5);
  CHECK(c.r_list == std::vector<double>{5.0, 50.0});
  CHECK(c.base_seed == 7);

  apply_overrides(doc, {{"HTLAB_NEW__KEY", "plain text"}});
  CHECK(doc["new"]["key"] == "plain text");
  CHECK_THROWS_AS(apply_overrides(doc, {{"HTLAB_NAME__X", "1"}}), Error);
}

TEST_CASE("fnv1a digests") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("mode names") {
  for (Mode m : {Mode::Analyze, Mode::Simulate, Mode::Cost, Mode::Bound, Mode::Validate}) {
    CHECK(parse_mode(to_string(m)) == m);
  }
}
