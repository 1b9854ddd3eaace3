#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>

#include "doctest.h"
#include "support.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;  // stdout and stderr interleaved
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

Run cli(const std::string& args, const std::string& input = "") {
  support::TempDir tmp;
  support::write_file(tmp.path() / "stdin", input);
  const std::string cmd = quote(RAFIQ_BIN) + " " + args + " < " + quote((tmp.path() / "stdin").string()) + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string config_arg() { return "--config " + quote((support::data_dir() / "config.json").string()); }

bool has(const std::string& s, const std::string& needle) { return s.find(needle) != std::string::npos; }

std::string entry_line(const std::string& id, const std::string& question, const std::string& source = "https://a.example") {
  return json{{"id", id},           {"lang", "en"}, {"questions", {question}}, {"answer", "a"},
              {"source", source}, {"updated", "2021-10-01"}}
             .dump() +
         "\n";
}

// Holds a listening socket on an ephemeral loopback port.
struct BusyPort {
  int fd = -1;
  int port = 0;
  BusyPort() {
    fd = socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    REQUIRE(listen(fd, 1) == 0);
    socklen_t len = sizeof addr;
    getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    port = ntohs(addr.sin_port);
  }
  ~BusyPort() { close(fd); }
};

}  // namespace

TEST_CASE("usage errors exit 2; help exits 0") {
  CHECK(cli("").code == 2);
  CHECK(cli("frobnicate").code == 2);
  CHECK(cli("validate").code == 2);
  CHECK(cli("scenario run " + config_arg()).code == 2);
  CHECK(cli("serve " + config_arg() + " --port 70000").code == 2);
  const auto help = cli("--help");
  CHECK(help.code == 0);
  CHECK(has(help.out, "validate"));
}

TEST_CASE("validate: fixture clean, broken flow reported") {
  const auto ok = cli("validate " + config_arg());
  CHECK(ok.code == 0);
  CHECK(has(ok.out, "0 diagnostics"));

  support::TempDir tmp;
  fs::copy(support::data_dir() / "flows", tmp.path() / "flows");
  auto flow = json::parse(support::read_file(tmp.path() / "flows" / "diagnosis_check.flow.json"));
  flow["steps"]["assess"]["cases"][0]["next"] = "sever";
  support::write_file(tmp.path() / "flows" / "diagnosis_check.flow.json", flow.dump());
  auto cfg = json::parse(support::read_file(support::data_dir() / "config.json"));
  for (const char* key : {"kb_dir", "intents", "templates", "entity_patterns", "static_dir"}) {
    cfg[key] = (support::data_dir() / cfg[key].get<std::string>()).string();
  }
  cfg["gazetteers"] = {(support::data_dir() / "gazetteers.json").string()};
  for (auto& [lang, p] : cfg["stopwords"].items()) p = (support::data_dir() / p.get<std::string>()).string();
  cfg["flows"] = {(tmp.path() / "flows").string()};
  support::write_file(tmp.path() / "config.json", cfg.dump());

  const auto bad = cli("validate --config " + quote((tmp.path() / "config.json").string()));
  CHECK(bad.code >= 1);
  CHECK(has(bad.out, "SchemaError"));
  CHECK(has(bad.out, "sever"));
  const auto js = cli("validate --json --config " + quote((tmp.path() / "config.json").string()));
  const auto doc = json::parse(js.out);
  CHECK(doc["count"].get<int>() == js.code);
  CHECK(doc["diagnostics"][0]["code"] == "SchemaError");

  CHECK(cli("validate --config /nonexistent.json").code == 2);
}

TEST_CASE("ingest copies new files and refuses duplicate ids") {
  support::TempDir tmp;
  const auto kb = tmp.path() / "kb";
  fs::create_directories(kb);
  support::write_file(tmp.path() / "a.jsonl", entry_line("a1", "first question") + entry_line("a2", "second question"));
  const auto first = cli("ingest --kb " + quote(kb.string()) + " --today 2021-10-20 " + quote((tmp.path() / "a.jsonl").string()));
  CHECK(first.code == 0);
  CHECK(has(first.out, "ingested 2 entries"));
  CHECK(fs::exists(kb / "a.jsonl"));

  // Re-ingesting the same file replaces it rather than colliding.
  CHECK(cli("ingest --kb " + quote(kb.string()) + " --today 2021-10-20 " + quote((tmp.path() / "a.jsonl").string())).code == 0);

  // Same id from another source is a collision; the same source would be an update.
  support::write_file(tmp.path() / "b.jsonl", entry_line("a1", "clash", "https://b.example"));
  const auto dup = cli("ingest --kb " + quote(kb.string()) + " --today 2021-10-20 " + quote((tmp.path() / "b.jsonl").string()));
  CHECK(dup.code == 1);
  CHECK(has(dup.out, "DuplicateId"));
  CHECK_FALSE(fs::exists(kb / "b.jsonl"));

  support::write_file(tmp.path() / "c.jsonl", "{broken\n");
  CHECK(cli("ingest --kb " + quote(kb.string()) + " " + quote((tmp.path() / "c.jsonl").string())).code == 1);
  CHECK(cli("ingest --kb " + quote((tmp.path() / "nope").string()) + " " + quote((tmp.path() / "a.jsonl").string())).code == 3);
}

TEST_CASE("stale lists old entries") {
  const auto zero = cli("stale " + config_arg() + " --window-days 0");
  CHECK(zero.code == 0);
  CHECK(has(zero.out, "57 stale of 57 entries (window 0 days)"));
  const auto js = json::parse(cli("stale " + config_arg() + " --json").out);
  CHECK(js["window_days"] == 14);
  CHECK(js["today"] == "2021-10-20");
  for (const auto& e : js["entries"]) CHECK(e["age_days"].get<long>() > 14);
  const auto kb_only = cli("stale --kb " + quote((support::data_dir() / "kb").string()) + " --today 2021-10-20 --window-days 0");
  CHECK(has(kb_only.out, "57 stale of 57"));
}

TEST_CASE("scenario run passes the shipped scripts and fails a broken one") {
  const auto dir = support::data_dir() / "scenarios";
  const auto pass = cli("scenario run " + config_arg() + " " + quote((dir / "scenario_en_vaccine.json").string()) + " " +
                          quote((dir / "scenario_ar_diagnosis.json").string()));
  CHECK(pass.code == 0);
  CHECK(has(pass.out, "PASS  English vaccine enquiry"));

  support::TempDir tmp;
  auto j = json::parse(support::read_file(dir / "scenario_en_vaccine.json"));
  j["turns"][1]["expect"]["options_include"] = {"Uncertified Vaccine"};
  support::write_file(tmp.path() / "broken.json", j.dump());
  const auto fail = cli("scenario run " + config_arg() + " " + quote((tmp.path() / "broken.json").string()));
  CHECK(fail.code == 1);
  CHECK(has(fail.out, "FAIL"));
  CHECK(has(fail.out, "Uncertified Vaccine"));

  support::write_file(tmp.path() / "invalid.json", R"({"name":"x","turns":[]})");
  CHECK(cli("scenario run " + config_arg() + " " + quote((tmp.path() / "invalid.json").string())).code == 1);
}

TEST_CASE("chat records a transcript that replays as a passing scenario") {
  support::TempDir tmp;
  const auto transcript = tmp.path() / "t.scenario.json";
  const auto chat = cli("chat " + config_arg() + " --lang en --transcript " + quote(transcript.string()),
                          "Is there a vaccine for covid19?\n1\n");
  CHECK(chat.code == 0);
  CHECK(has(chat.out, "bot> "));
  CHECK(has(chat.out, "Certified Vaccine"));
  CHECK(has(chat.out, "Learn More"));
  REQUIRE(fs::exists(transcript));
  const auto script = json::parse(support::read_file(transcript));
  CHECK(script["language"] == "en");
  CHECK(script["turns"].size() == 2);
  CHECK(script["turns"][1]["user"] == "Certified Vaccine");
  CHECK(cli("scenario run " + config_arg() + " " + quote(transcript.string())).code == 0);

  const auto picker = cli("chat --json " + config_arg() + " --transcript " + quote((tmp.path() / "p.json").string()),
                            "العربية\n");
  CHECK(picker.code == 0);
  CHECK(has(picker.out, "\"language\":\"ar\""));
}

TEST_CASE("serve reports a busy port and stops cleanly on SIGTERM") {
  BusyPort busy;
  const auto r = cli("serve " + config_arg() + " --quiet --port " + std::to_string(busy.port));
  CHECK(r.code == 3);
  CHECK(has(r.out, "cannot listen on 127.0.0.1:" + std::to_string(busy.port)));

  int port = 0;
  {
    BusyPort probe;
    port = probe.port;
  }
  const auto served = cli("serve " + config_arg() + " --quiet --port " + std::to_string(port) +
                            " & pid=$!; sleep 1; kill -TERM $pid; wait $pid");
  CHECK(served.code == 0);
  CHECK(has(served.out, "listening on http://127.0.0.1:" + std::to_string(port)));
}
