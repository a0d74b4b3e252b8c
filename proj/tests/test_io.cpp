#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "costfl/io.hpp"

using namespace costfl;

TEST_CASE("format_number round-trips") {
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double v = u(g) * std::pow(10.0, static_cast<double>(g() % 20) - 10);
    CHECK(std::strtod(io::format_number(v).c_str(), nullptr) == v);
  }
  CHECK(io::format_number(0.1) == "0.1");
  CHECK(io::format_number(3.0) == "3");
  CHECK(io::format_number(1.0 / 3) == "0.3333333333333333");
}

TEST_CASE("rows") {
  std::ostringstream os;
  io::write_row(os, {"a", "", "c"});
  CHECK(os.str() == "a,,c\n");
  CHECK(io::split_row("a,,c") == std::vector<std::string>{"a", "", "c"});
  CHECK(io::split_row("a,b,") == std::vector<std::string>{"a", "b", ""});
}

TEST_CASE("dataset round trip") {
  const auto data = generate_synthetic(1, 1, 4, CountDistribution{8, 3, 2}, {1, "data"});
  std::stringstream ss;
  io::write_dataset(ss, data);
  const auto back = io::read_dataset(ss);
  REQUIRE(back.num_clients() == 4);
  for (int c = 0; c < 4; ++c) {
    CHECK(back.clients[static_cast<std::size_t>(c)].features == data.clients[static_cast<std::size_t>(c)].features);
    CHECK(back.clients[static_cast<std::size_t>(c)].labels == data.clients[static_cast<std::size_t>(c)].labels);
  }
  std::stringstream bad("client_id,label\n");
  CHECK_THROWS_AS(io::read_dataset(bad), std::invalid_argument);
  std::stringstream gap;
  io::write_dataset(gap, data);
  std::string text = gap.str();
  text.replace(text.find("\n0,") + 1, 1, "2");
  std::stringstream gapped(text);
  CHECK_THROWS_AS(io::read_dataset(gapped), std::invalid_argument);
}

TEST_CASE("samples round trip") {
  const std::vector<EstimationSample> s{{10, 10, 52, 106, 7}, {20, 20, 39, 68, 18446744073709551615ull}};
  std::stringstream ss;
  io::write_samples(ss, s);
  CHECK(ss.str().rfind("k,e,rounds_fa,rounds_fb,seed\n", 0) == 0);
  CHECK(io::read_samples(ss) == s);
  std::stringstream bad("k,e,rounds_fa,rounds_fb,seed\n1,1,5,5,0\n");
  CHECK_THROWS_AS(io::read_samples(bad), std::invalid_argument);
}

TEST_CASE("run and trace tables") {
  FedRunRecord rec;
  rec.k = 2;
  rec.e = 3;
  rec.complete = true;
  rec.rounds.push_back({1, {0, 4}, 2.5, 1.5, 0.25, 1.5, 0.25});
  std::ostringstream os;
  io::write_run(os, rec);
  CHECK(os.str() ==
        "round,loss,round_time_s,round_energy_j,cumulative_time_s,cumulative_energy_j,sampled\n"
        "1,2.5,1.5,0.25,1.5,0.25,0 4\n");
  const auto j = io::to_json(rec);
  CHECK(j["rounds_executed"] == 1);
  CHECK(j["rounds"][0]["sampled"][1] == 4);

  AcsTrace t;
  t.iterates = {{10, 10, {}}, {4, 7.5, {}}};
  t.final_integer_point = {4, 8, {}};
  t.converged = true;
  const P3Problem p{{0.1, 2, 1e-3, 2e-2}, 10, 0.5, 100};
  std::ostringstream tr;
  io::write_trace(tr, t, p);
  CHECK(tr.str().rfind("iteration,k,e,objective\n0,10,10,", 0) == 0);
  CHECK(io::to_json(t, p)["k_star"] == 4);
}
