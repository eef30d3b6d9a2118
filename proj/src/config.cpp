#include "rbm/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

#include "rbm/errors.hpp"

namespace rbm {

struct Config::Impl {
  toml::table root;
};

namespace {

std::pair<std::string, std::string> split_key(const std::string& key) {
  const auto dot = key.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == key.size() ||
      key.find('.', dot + 1) != std::string::npos) {
    throw ConfigError("config keys have the form section.name (got '" + key + "')");
  }
  return {key.substr(0, dot), key.substr(dot + 1)};
}

std::string describe_position(const toml::source_region& where) {
  std::ostringstream os;
  os << where.begin.line << ':' << where.begin.column;
  return os.str();
}

std::unique_ptr<toml::node> parse_literal(const std::string& literal, const std::string& origin) {
  try {
    toml::table t = toml::parse("v = " + literal, origin);
    return std::unique_ptr<toml::node>(t.get("v")->visit([](auto& n) -> toml::node* {
      return new std::remove_cvref_t<decltype(n)>(n);
    }));
  } catch (const toml::parse_error& e) {
    throw ConfigError(origin + ": cannot parse value '" + literal + "': " +
                      std::string(e.description()));
  }
}

// Converts `incoming` to the type of `reference`; integers widen to floats.
std::unique_ptr<toml::node> coerce(const toml::node& reference, const toml::node& incoming,
                                   const std::string& key) {
  auto fail = [&key](const char* want) {
    throw ConfigError("config key '" + key + "' expects " + std::string(want));
  };
  if (reference.is_floating_point()) {
    if (incoming.is_floating_point()) return std::make_unique<toml::value<double>>(*incoming.as_floating_point());
    if (incoming.is_integer()) {
      return std::make_unique<toml::value<double>>(static_cast<double>(incoming.as_integer()->get()));
    }
    fail("a number");
  }
  if (reference.is_integer()) {
    if (!incoming.is_integer()) fail("an integer");
    return std::make_unique<toml::value<std::int64_t>>(*incoming.as_integer());
  }
  if (reference.is_boolean()) {
    if (!incoming.is_boolean()) fail("true or false");
    return std::make_unique<toml::value<bool>>(*incoming.as_boolean());
  }
  if (reference.is_string()) {
    if (!incoming.is_string()) fail("a string");
    return std::make_unique<toml::value<std::string>>(*incoming.as_string());
  }
  if (reference.is_array()) {
    if (!incoming.is_array()) fail("an array");
    const toml::array& ref = *reference.as_array();
    auto out = std::make_unique<toml::array>();
    const bool want_float = ref.empty() || ref.front().is_floating_point();
    for (const toml::node& el : *incoming.as_array()) {
      if (want_float && (el.is_floating_point() || el.is_integer())) {
        out->push_back(el.is_integer() ? static_cast<double>(el.as_integer()->get())
                                       : el.as_floating_point()->get());
      } else if (!want_float && el.is_integer()) {
        out->push_back(el.as_integer()->get());
      } else {
        fail(want_float ? "an array of numbers" : "an array of integers");
      }
    }
    return out;
  }
  fail("a scalar or array value");
  return nullptr;
}

}  // namespace

Config::Config(std::span<const KeySpec> keys) : keys_(keys.begin(), keys.end()), impl_(std::make_unique<Impl>()) {
  for (const auto& spec : keys_) {
    const auto [section, name] = split_key(spec.key);
    auto value = parse_literal(spec.default_value, "default for " + spec.key);
    if (!impl_->root.contains(section)) impl_->root.insert(section, toml::table{});
    toml::table& t = *impl_->root.get_as<toml::table>(section);
    if (t.contains(name)) throw ConfigError("duplicate config key '" + spec.key + "'");
    value->visit([&](auto& n) { t.insert(name, n); });
  }
}

Config::Config(const Config& other) : keys_(other.keys_), impl_(std::make_unique<Impl>(*other.impl_)) {}

Config& Config::operator=(const Config& other) {
  if (this != &other) {
    keys_ = other.keys_;
    impl_ = std::make_unique<Impl>(*other.impl_);
  }
  return *this;
}

Config::Config(Config&&) noexcept = default;
Config& Config::operator=(Config&&) noexcept = default;
Config::~Config() = default;

void Config::merge_text(const std::string& text, const std::string& origin) {
  toml::table incoming;
  try {
    incoming = toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    throw ConfigError(origin + ":" + describe_position(e.source()) + ": " + std::string(e.description()));
  }
  for (auto&& [section_key, section_node] : incoming) {
    const std::string section(section_key.str());
    const toml::table* section_table = section_node.as_table();
    if (section_table == nullptr) {
      throw ConfigError(origin + ": unknown top-level key '" + section + "' (expected a [section])");
    }
    for (auto&& [name_key, value] : *section_table) {
      const std::string full = section + "." + std::string(name_key.str());
      const toml::node* reference = impl_->root.at_path(full).node();
      if (reference == nullptr) throw ConfigError(origin + ": unknown config key '" + full + "'");
      auto converted = coerce(*reference, value, full);
      toml::table& t = *impl_->root.get_as<toml::table>(section);
      converted->visit([&](auto& n) { t.insert_or_assign(name_key.str(), n); });
    }
  }
}

void Config::merge_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw ConfigError("config file not found: " + path.string());
  }
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  merge_text(buffer.str(), path.string());
}

void Config::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value (got '" + assignment + "')");
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  const std::string key = trim(assignment.substr(0, eq));
  const std::string literal = trim(assignment.substr(eq + 1));
  const auto [section, name] = split_key(key);
  const toml::node* reference = impl_->root.at_path(key).node();
  if (reference == nullptr) throw ConfigError("unknown config key '" + key + "'");
  std::unique_ptr<toml::node> parsed;
  if (reference->is_string() && !literal.empty() && literal.front() != '"' && literal.front() != '\'') {
    parsed = std::make_unique<toml::value<std::string>>(literal);
  } else {
    parsed = parse_literal(literal, "--set " + key);
  }
  auto converted = coerce(*reference, *parsed, key);
  toml::table& t = *impl_->root.get_as<toml::table>(section);
  converted->visit([&](auto& n) { t.insert_or_assign(name, n); });
}

bool Config::has(const std::string& key) const { return impl_->root.at_path(key).node() != nullptr; }

namespace {

const toml::node& lookup(const toml::table& root, const std::string& key) {
  const toml::node* n = root.at_path(key).node();
  if (n == nullptr) throw ConfigError("config key '" + key + "' is not declared");
  return *n;
}

}  // namespace

double Config::get_double(const std::string& key) const {
  const toml::node& n = lookup(impl_->root, key);
  if (auto v = n.value<double>()) return *v;
  throw ConfigError("config key '" + key + "' is not a number");
}

std::int64_t Config::get_int(const std::string& key) const {
  const toml::node& n = lookup(impl_->root, key);
  if (const auto* v = n.as_integer()) return v->get();
  throw ConfigError("config key '" + key + "' is not an integer");
}

std::size_t Config::get_size(const std::string& key) const {
  const std::int64_t v = get_int(key);
  if (v < 0) throw ConfigError("config key '" + key + "' must be nonnegative");
  return static_cast<std::size_t>(v);
}

bool Config::get_bool(const std::string& key) const {
  const toml::node& n = lookup(impl_->root, key);
  if (const auto* v = n.as_boolean()) return v->get();
  throw ConfigError("config key '" + key + "' is not a boolean");
}

std::string Config::get_string(const std::string& key) const {
  const toml::node& n = lookup(impl_->root, key);
  if (const auto* v = n.as_string()) return v->get();
  throw ConfigError("config key '" + key + "' is not a string");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  const toml::node& n = lookup(impl_->root, key);
  const auto* arr = n.as_array();
  if (arr == nullptr) throw ConfigError("config key '" + key + "' is not an array");
  std::vector<double> out;
  for (const toml::node& el : *arr) {
    auto v = el.value<double>();
    if (!v) throw ConfigError("config key '" + key + "' must hold numbers");
    out.push_back(*v);
  }
  return out;
}

std::vector<std::size_t> Config::get_sizes(const std::string& key) const {
  const toml::node& n = lookup(impl_->root, key);
  const auto* arr = n.as_array();
  if (arr == nullptr) throw ConfigError("config key '" + key + "' is not an array");
  std::vector<std::size_t> out;
  for (const toml::node& el : *arr) {
    const auto* v = el.as_integer();
    if (v == nullptr || v->get() < 0) throw ConfigError("config key '" + key + "' must hold nonnegative integers");
    out.push_back(static_cast<std::size_t>(v->get()));
  }
  return out;
}

std::string Config::to_toml() const {
  std::ostringstream os;
  os << toml::toml_formatter(impl_->root);
  return os.str();
}

std::string Config::to_json() const {
  std::ostringstream os;
  os << toml::json_formatter(impl_->root);
  return os.str();
}

}  // namespace rbm
