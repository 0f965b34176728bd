// Copyright 2026 The Observatory Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "obs/stack/stack.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

#include "obs/alerting/alerting.hpp"
#include "obs/analytics/analytics.hpp"
#include "obs/collector/collector.hpp"
#include "obs/core/error.hpp"
#include "obs/gateway/gateway.hpp"

namespace obs::stack {
namespace {

// Variables each component reads from the env file.
const std::map<std::string, std::vector<std::string>>& ComponentEnv() {
  static const std::map<std::string, std::vector<std::string>> kEnv = {
      {"api", {"API_ADMIN_TOKEN", "API_LISTEN_ADDR", "API_TEST_MODE", "API_USER_TOKENS"}},
      {"collector", {"COLLECTOR_TOKEN"}},
  };
  return kEnv;
}

bool Enabled(const StackConfig& c, const std::string& name) { return c.components.contains(name); }

std::string JoinList(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  return out;
}

struct Secret {
  std::string fragment;
  std::string var;
};

// Whole values of credential variables, plus the token part of
// `token:label=value` lists, longest first.
std::vector<Secret> SecretFragments(const EnvMap& env) {
  std::vector<Secret> out;
  for (const auto& [name, value] : env) {
    if (!IsSecretName(name) || value.empty()) continue;
    out.push_back({value, name});
    for (const auto& item : SplitList(value)) {
      out.push_back({item, name});
      if (auto colon = item.find(':'); colon != std::string::npos) {
        out.push_back({item.substr(0, colon), name});
      }
    }
  }
  std::erase_if(out, [](const Secret& s) { return s.fragment.size() < 4; });
  std::sort(out.begin(), out.end(), [](const Secret& a, const Secret& b) {
    return a.fragment.size() != b.fragment.size() ? a.fragment.size() > b.fragment.size()
                                                  : a.fragment < b.fragment;
  });
  return out;
}

// Replaces every secret occurrence with a `${VAR}` reference in one left to
// right pass, so inserted references are never rescanned.
std::string Redact(const std::string& value, const std::vector<Secret>& secrets, bool* changed) {
  std::string out;
  std::size_t pos = 0;
  while (pos < value.size()) {
    const Secret* hit = nullptr;
    for (const auto& s : secrets) {
      if (value.compare(pos, s.fragment.size(), s.fragment) == 0) {
        hit = &s;
        break;
      }
    }
    if (hit) {
      out += "${" + hit->var + "}";
      pos += hit->fragment.size();
      if (changed) *changed = true;
    } else {
      out += value[pos++];
    }
  }
  return out;
}

std::vector<std::string> EnvRefs(const std::string& value) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = value.find("${", pos)) != std::string::npos) {
    auto end = value.find('}', pos);
    if (end == std::string::npos) break;
    out.push_back(value.substr(pos + 2, end - pos - 2));
    pos = end + 1;
  }
  return out;
}

}  // namespace

const std::vector<std::string>& KnownComponents() {
  static const std::vector<std::string> kAll = {"alerting",  "analytics", "api",  "collector",
                                                "dashboard", "gateway",   "metastore", "tsdb"};
  return kAll;
}

const std::vector<Requirement>& Requirements() {
  static const std::vector<Requirement> kReq = {
      {"gateway", {"tsdb", "metastore"}},
      {"analytics", {"tsdb"}},
      {"alerting", {"tsdb"}},
      {"dashboard", {"api"}},
  };
  return kReq;
}

const std::vector<StartupEdge>& StartupEdges() {
  static const std::vector<StartupEdge> kEdges = {
      {"tsdb", "gateway"},        {"metastore", "gateway"},   {"gateway", "collector"},
      {"tsdb", "analytics"},      {"metastore", "analytics"}, {"collector", "analytics"},
      {"tsdb", "alerting"},       {"metastore", "alerting"},  {"analytics", "alerting"},
      {"tsdb", "api"},            {"metastore", "api"},       {"gateway", "api"},
      {"analytics", "api"},       {"alerting", "api"},        {"api", "dashboard"},
  };
  return kEdges;
}

bool IsSecretName(std::string_view name) {
  for (std::string_view marker : {"TOKEN", "SECRET", "PASSWORD", "KEY"}) {
    if (name.find(marker) != std::string_view::npos) return true;
  }
  return false;
}

StackConfig StackConfig::Load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kFileNotFound, "config not found: " + path.string());
  }
  ConfigFile file = ConfigFile::Load(path);
  StackConfig c;
  c.config = std::move(file);
  c.source = path;
  for (const auto& name : SplitList(c.config.GetOr("components", ""))) c.components.insert(name);
  auto env = c.config.GetOr("env_file", "");
  if (!env.empty()) {
    std::filesystem::path p(env);
    c.env_file = p.is_absolute() ? p : path.parent_path() / p;
  }
  return c;
}

StackConfig StackConfig::Parse(std::string_view text, const std::filesystem::path& base_dir) {
  StackConfig c;
  c.config = ConfigFile::ParseText(text);
  for (const auto& name : SplitList(c.config.GetOr("components", ""))) c.components.insert(name);
  auto env = c.config.GetOr("env_file", "");
  if (!env.empty()) {
    std::filesystem::path p(env);
    c.env_file = p.is_absolute() ? p : base_dir / p;
  }
  return c;
}

std::string ValidationReport::Render() const {
  std::ostringstream out;
  auto emit = [&](const char* severity, const Finding& f) {
    out << severity << ": " << f.path;
    if (f.line > 0) out << " (line " << f.line << ")";
    out << ": " << f.message << "\n";
  };
  for (const auto& f : errors) emit("error", f);
  for (const auto& f : warnings) emit("warning", f);
  return out.str();
}

ValidationReport ValidateConfig(const StackConfig& c, const EnvMap& env) {
  ValidationReport report;
  const ConfigFile& cfg = c.config;
  auto error = [&](const std::string& path, std::string message) {
    report.errors.push_back({path, cfg.LineOf(path), std::move(message)});
  };
  auto warn = [&](const std::string& path, std::string message) {
    report.warnings.push_back({path, cfg.LineOf(path), std::move(message)});
  };
  const auto& known = KnownComponents();

  if (c.components.empty()) error("components", "no components enabled");
  for (const auto& name : c.components) {
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      error("components", "unknown component '" + name + "'");
    }
  }
  if (!Enabled(c, "collector")) {
    error("components", "missing mandatory collection layer: enable collector");
  }
  if (!Enabled(c, "dashboard")) {
    error("components", "missing mandatory visualization layer: enable dashboard");
  }
  for (const auto& req : Requirements()) {
    if (!Enabled(c, req.component)) continue;
    bool met = std::any_of(req.any_of.begin(), req.any_of.end(),
                           [&](const std::string& d) { return Enabled(c, d); });
    if (!met) {
      std::string needs = req.any_of.size() == 1 ? req.any_of[0]
                                                 : req.any_of[0] + " or " + req.any_of[1];
      error("components", req.component + " requires " + needs + ": missing " + needs);
    }
  }

  for (const auto& [key, value] : cfg.entries()) {
    if (key == "components" || key == "env_file") continue;
    auto dot = key.find('.');
    std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
    if (std::find(known.begin(), known.end(), section) == known.end()) {
      warn(key, "unknown setting");
    } else if (!Enabled(c, section)) {
      warn(key, "configures disabled component " + section);
    }
  }

  if (Enabled(c, "collector")) {
    try {
      collector::CollectorOptions::FromConfig(cfg);
    } catch (const Error& e) {
      error("collector", e.what());
    }
  }
  if (Enabled(c, "analytics")) {
    try {
      analytics::AnalyticsOptions::FromConfig(cfg);
    } catch (const Error& e) {
      error("analytics", e.what());
    }
  }
  if (Enabled(c, "alerting")) {
    try {
      alerting::AlertingOptions::FromConfig(cfg);
    } catch (const Error& e) {
      error("alerting.default_eval_interval_seconds", e.what());
    }
    bool any_webhook = cfg.Get("alerting.webhook_url").has_value();
    for (const auto& key : cfg.KeysWithPrefix("alerting.rules.")) {
      if (key.ends_with(".webhook_url")) any_webhook = true;
    }
    if (!any_webhook) warn("alerting", "no webhook URL configured; alerts will only be listed");
  }
  if (Enabled(c, "gateway")) {
    const std::string prefix = "gateway.scrape_targets.";
    std::set<std::string> indices;
    for (const auto& key : cfg.KeysWithPrefix(prefix)) {
      auto rest = key.substr(prefix.size());
      indices.insert(rest.substr(0, rest.find('.')));
    }
    ConfigFile usable;
    for (const auto& index : indices) {
      std::string base = prefix + index + ".";
      if (cfg.GetOr(base + "url", "").empty()) {
        warn(base + "url", "scrape target has no url and will be skipped");
        continue;
      }
      for (const auto& key : cfg.KeysWithPrefix(base)) usable.Set(key, *cfg.Get(key));
    }
    try {
      gateway::ParseScrapeTargets(usable);
    } catch (const Error& e) {
      error("gateway.scrape_targets", e.what());
    }
    if (indices.empty() && cfg.GetOr("collector.push_url", "").empty()) {
      warn("gateway", "no scrape targets and collector.push_url is unset; nothing feeds the gateway");
    }
  }

  if (!c.env_file.empty() && !std::filesystem::exists(c.env_file)) {
    warn("env_file", "env file " + c.env_file.string() + " does not exist");
  }
  if (Enabled(c, "api") && !env.contains("API_ADMIN_TOKEN")) {
    warn("env_file", "API_ADMIN_TOKEN is not set; no admin can log in");
  }
  auto secrets = SecretFragments(env);
  for (const auto& [key, value] : cfg.entries()) {
    bool inlined = false;
    Redact(value, secrets, &inlined);
    if (inlined) warn(key, "value inlines a secret from the env file; use a ${VAR} reference");
    for (const auto& ref : EnvRefs(value)) {
      if (!env.contains(ref)) warn(key, "references ${" + ref + "} which the env file does not set");
    }
  }
  return report;
}

std::vector<std::string> StartupOrder(const std::set<std::string>& components) {
  std::map<std::string, int> indegree;
  std::map<std::string, std::vector<std::string>> next;
  for (const auto& c : components) indegree[c] = 0;
  for (const auto& e : StartupEdges()) {
    if (!components.contains(e.before) || !components.contains(e.after)) continue;
    next[e.before].push_back(e.after);
    ++indegree[e.after];
  }
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [c, d] : indegree) {
    if (d == 0) ready.push(c);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string c = ready.top();
    ready.pop();
    order.push_back(c);
    for (const auto& n : next[c]) {
      if (--indegree[n] == 0) ready.push(n);
    }
  }
  return order;
}

DeploymentPlan MergeComponents(const StackConfig& config, const EnvMap& env) {
  auto report = ValidateConfig(config, env);
  if (!report.ok()) throw Error(ErrorCode::kValidationFailed, report.Render());
  auto secrets = SecretFragments(env);
  DeploymentPlan plan;
  plan.env_file = config.config.GetOr("env_file", "");
  int step = 0;
  for (const auto& name : StartupOrder(config.components)) {
    PlanEntry entry;
    entry.component = name;
    entry.step = ++step;
    for (const auto& e : StartupEdges()) {
      if (e.after == name && config.components.contains(e.before)) {
        entry.depends_on.push_back(e.before);
      }
    }
    std::sort(entry.depends_on.begin(), entry.depends_on.end());
    std::set<std::string> env_names;
    if (auto it = ComponentEnv().find(name); it != ComponentEnv().end()) {
      env_names.insert(it->second.begin(), it->second.end());
    }
    const std::string prefix = name + ".";
    for (const auto& key : config.config.KeysWithPrefix(prefix)) {
      std::string value = Redact(*config.config.Get(key), secrets, nullptr);
      for (const auto& ref : EnvRefs(value)) env_names.insert(ref);
      entry.config[key.substr(prefix.size())] = std::move(value);
    }
    entry.env.assign(env_names.begin(), env_names.end());
    plan.entries.push_back(std::move(entry));
  }
  return plan;
}

std::string DeploymentPlan::Render() const {
  std::ostringstream out;
  std::vector<std::string> order;
  for (const auto& e : entries) order.push_back(e.component);
  out << "# deployment plan\n";
  out << "env_file = " << env_file << "\n";
  out << "order = " << JoinList(order) << "\n";
  for (const auto& e : entries) {
    out << "\n[" << e.component << "]\n";
    out << "step = " << e.step << "\n";
    out << "depends_on = " << JoinList(e.depends_on) << "\n";
    std::vector<std::string> refs;
    for (const auto& name : e.env) refs.push_back("${" + name + "}");
    out << "env = " << JoinList(refs) << "\n";
    for (const auto& [k, v] : e.config) out << "config." << k << " = " << v << "\n";
  }
  return out.str();
}

}  // namespace obs::stack
