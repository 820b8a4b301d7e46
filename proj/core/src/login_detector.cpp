#include "pt/login_detector.hpp"

#include <algorithm>
#include <array>
#include <json.hpp>

#include "pt/error.hpp"
#include "pt/html.hpp"

namespace pt {
namespace {

std::string trim_lower(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && html::is_ascii_space(s[b])) ++b;
  while (e > b && html::is_ascii_space(s[e - 1])) --e;
  return html::ascii_lower(s.substr(b, e - b));
}

bool attr_in(const html::Token& tok, std::string_view name,
             std::initializer_list<std::string_view> values, std::string* matched) {
  const html::Attribute* a = tok.attribute(name);
  if (!a) return false;
  std::string v = trim_lower(a->value);
  for (auto want : values) {
    if (v == want) {
      *matched = std::string(name) + "=" + v;
      return true;
    }
  }
  return false;
}

}  // namespace

std::vector<std::string> DetectionConfig::default_content_keywords() {
  return {"username", "password", "login", "signin", "sign-in", "log in", "log-in",
          "authenticate", "credentials", "account", "identity", "user", "email", "e-mail",
          "passcode", "customer number", "pin", "secret code", "authentication code",
          "security code", "passphrase", "account number", "membership number",
          "social security number", "authorization code", "login code", "secure login",
          "unique identifier", "login id", "login name", "login details", "login information",
          "login credentials", "login data", "login token", "login key", "userid", "forgot",
          "Log in", "Login", "Email", "Username", "Sign in", "signed in", "Phone", "phone"};
}

void DetectionConfig::validate() const {
  if (content_keyword_weight < 0 || content_keyword_cap < 0 || url_weight < 0 ||
      submit_weight < 0 || input_field_weight < 0) {
    throw Error(ErrorCode::ConfigError, "detection weights must be non-negative");
  }
  if (login_threshold <= 0) throw Error(ErrorCode::ConfigError, "login_threshold must be > 0");
}

DetectionConfig DetectionConfig::from_json(std::string_view json) {
  DetectionConfig cfg;
  try {
    auto doc = nlohmann::json::parse(json);
    if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "detection config must be an object");
    auto get_int = [&](const char* key, int& out) {
      if (doc.contains(key)) out = doc.at(key).get<int>();
    };
    if (doc.contains("content_keywords"))
      cfg.content_keywords = doc["content_keywords"].get<std::vector<std::string>>();
    if (doc.contains("url_keywords"))
      cfg.url_keywords = doc["url_keywords"].get<std::vector<std::string>>();
    get_int("content_keyword_weight", cfg.content_keyword_weight);
    get_int("content_keyword_cap", cfg.content_keyword_cap);
    get_int("url_weight", cfg.url_weight);
    get_int("submit_weight", cfg.submit_weight);
    get_int("input_field_weight", cfg.input_field_weight);
    get_int("login_threshold", cfg.login_threshold);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("detection config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string DetectionConfig::to_json() const {
  nlohmann::json doc = {
      {"content_keywords", content_keywords},
      {"content_keyword_weight", content_keyword_weight},
      {"content_keyword_cap", content_keyword_cap},
      {"url_keywords", url_keywords},
      {"url_weight", url_weight},
      {"submit_weight", submit_weight},
      {"input_field_weight", input_field_weight},
      {"login_threshold", login_threshold},
  };
  return doc.dump(2);
}

std::string_view to_string(IdentifierKind kind) noexcept {
  switch (kind) {
    case IdentifierKind::ContentKeyword: return "content_keyword";
    case IdentifierKind::UrlKeyword: return "url_keyword";
    case IdentifierKind::SubmitControl: return "submit_control";
    case IdentifierKind::InputField: return "input_field";
  }
  return "unknown";
}

int DetectionReport::keyword_total_uncapped() const {
  int total = 0;
  for (const auto& c : contributions) {
    if (c.kind == IdentifierKind::ContentKeyword) total += c.weight;
  }
  return total;
}

int DetectionReport::keyword_total() const {
  return std::min(keyword_total_uncapped(), keyword_cap);
}

std::string DetectionReport::to_json() const {
  auto contribs = nlohmann::json::array();
  for (const auto& c : contributions) {
    contribs.push_back({{"kind", to_string(c.kind)}, {"token", c.token}, {"weight", c.weight}});
  }
  nlohmann::json doc = {
      {"score", score},
      {"is_login", is_login},
      {"login_threshold", login_threshold},
      {"keyword_total", keyword_total()},
      {"keyword_capped", keyword_capped()},
      {"contributions", contribs},
  };
  return doc.dump(2);
}

DetectionReport detect_login(std::string_view html_doc, std::string_view url,
                             const DetectionConfig& config) {
  DetectionReport report;
  report.login_threshold = config.login_threshold;
  report.keyword_cap = config.content_keyword_cap;

  const auto tokens = html::tokenize(html_doc);

  // Keyword haystack: visible text plus attribute values, newline-separated.
  std::string haystack;
  for (const auto& tok : tokens) {
    if (tok.kind == html::Token::Kind::Text && !tok.raw_text) {
      haystack += tok.data;
      haystack.push_back('\n');
    } else if (tok.kind == html::Token::Kind::StartTag) {
      for (const auto& a : tok.attributes) {
        haystack += a.value;
        haystack.push_back('\n');
      }
    }
  }
  for (const auto& kw : config.content_keywords) {
    if (!kw.empty() && haystack.find(kw) != std::string::npos) {
      report.contributions.push_back(
          {IdentifierKind::ContentKeyword, kw, config.content_keyword_weight});
    }
  }

  for (const auto& kw : config.url_keywords) {
    if (!kw.empty() && url.find(kw) != std::string_view::npos) {
      report.contributions.push_back({IdentifierKind::UrlKeyword, kw, config.url_weight});
      break;
    }
  }

  std::vector<Contribution> inputs;
  std::string submit_token;
  int form_depth = 0;
  for (const auto& tok : tokens) {
    if (tok.kind == html::Token::Kind::EndTag && tok.data == "form") {
      form_depth = std::max(0, form_depth - 1);
      continue;
    }
    if (tok.kind != html::Token::Kind::StartTag) continue;
    if (tok.data == "form") {
      if (!tok.self_closing) ++form_depth;
    } else if (tok.data == "button") {
      const html::Attribute* type = tok.attribute("type");
      if (submit_token.empty()) {
        if (type && trim_lower(type->value) == "submit") {
          submit_token = "button[type=submit]";
        } else if (!type && form_depth > 0) {
          submit_token = "button in form";
        }
      }
    } else if (tok.data == "input") {
      const html::Attribute* type = tok.attribute("type");
      if (submit_token.empty() && type && trim_lower(type->value) == "submit") {
        submit_token = "input[type=submit]";
      }
      std::string matched;
      if (attr_in(tok, "name", {"username", "userid", "email"}, &matched) ||
          attr_in(tok, "type", {"email", "password"}, &matched) ||
          attr_in(tok, "placeholder", {"username", "email", "password"}, &matched)) {
        inputs.push_back({IdentifierKind::InputField, matched, config.input_field_weight});
      }
    }
  }
  if (!submit_token.empty()) {
    report.contributions.push_back(
        {IdentifierKind::SubmitControl, submit_token, config.submit_weight});
  }
  report.contributions.insert(report.contributions.end(), inputs.begin(), inputs.end());

  report.score = report.keyword_total();
  for (const auto& c : report.contributions) {
    if (c.kind != IdentifierKind::ContentKeyword) report.score += c.weight;
  }
  report.is_login = report.score > config.login_threshold;
  return report;
}

std::string explain(const DetectionReport& report) {
  std::string out;
  std::string keywords;
  for (const auto& c : report.contributions) {
    if (c.kind != IdentifierKind::ContentKeyword) continue;
    if (!keywords.empty()) keywords += ", ";
    keywords += c.token;
  }
  if (!keywords.empty()) {
    out += report.keyword_capped() ? "keywords (capped): +" : "keywords: +";
    out += std::to_string(report.keyword_total()) + " (" + keywords + ")\n";
  }
  for (const auto& c : report.contributions) {
    switch (c.kind) {
      case IdentifierKind::ContentKeyword: continue;
      case IdentifierKind::UrlKeyword: out += "url keyword \""; break;
      case IdentifierKind::SubmitControl: out += "submit control \""; break;
      case IdentifierKind::InputField: out += "input field \""; break;
    }
    out += c.token + "\": +" + std::to_string(c.weight) + "\n";
  }
  out += "score " + std::to_string(report.score);
  if (report.is_login) {
    out += " > " + std::to_string(report.login_threshold) + ": login page";
  } else {
    out += " ≤ " + std::to_string(report.login_threshold) + ": not a login page";
  }
  return out;
}

}  // namespace pt
