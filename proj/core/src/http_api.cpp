#include "semprobe/http_api.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "semprobe/error.hpp"
#include "semprobe/format.hpp"

namespace semprobe::service {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::not_found: return 404;
    case ErrorKind::sequencing:
    case ErrorKind::conflict: return 409;
    case ErrorKind::validation:
    case ErrorKind::domain: return 422;
    case ErrorKind::schema: return 400;
    default: return 500;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& error) {
  json body{{"error", std::string(to_string(error.kind()))}, {"message", error.what()}};
  if (const auto* sequencing = dynamic_cast<const SequencingError*>(&error)) {
    body["cursor"] = sequencing->cursor();
  }
  send_json(res, status_for(error.kind()), body);
}

json condition_json(const StimulusCondition& condition) {
  return {{"pair_id", condition.pair_id},
          {"alpha", condition.alpha},
          {"guidance_scale", condition.guidance_scale},
          {"seed", condition.seed},
          {"image_ref", condition.image_ref}};
}

json ack_json(const Ack& ack) {
  return {{"session_id", ack.session_id},
          {"trial_index", ack.trial_index},
          {"cursor", ack.cursor},
          {"received_at", ack.received_at}};
}

json parse_body(const httplib::Request& req) {
  try {
    auto body = json::parse(req.body);
    if (!body.is_object()) throw Error(ErrorKind::schema, "request body must be a JSON object");
    return body;
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::schema, std::string("invalid JSON body: ") + e.what());
  }
}

template <typename T>
T field(const json& body, const char* name) {
  if (!body.contains(name)) throw Error(ErrorKind::schema, std::string("missing field '") + name + "'");
  try {
    return body.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::schema, std::string("field '") + name + "' has the wrong type");
  }
}

// Runs a handler, mapping library errors onto JSON error responses.
template <typename Handler>
httplib::Server::Handler guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", "internal"}, {"message", e.what()}});
    }
  };
}

std::string content_type_for(const fs::path& path) {
  auto ext = path.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

}  // namespace

struct HttpService::Impl {
  SessionStore& store;
  HttpOptions options;
  httplib::Server server;

  Impl(SessionStore& s, HttpOptions o) : store(s), options(std::move(o)) { mount(); }

  void mount();
};

void HttpService::Impl::mount() {
  server.Post("/v1/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req);
    auto session = store.create_session(field<std::string>(body, "observer_id"),
                                        field<std::string>(body, "manifest_id"),
                                        field<std::uint64_t>(body, "rng_seed"));
    send_json(res, 201,
              {{"session_id", session.session_id},
               {"observer_id", session.observer_id},
               {"manifest_id", session.manifest_id},
               {"total_trials", session.trial_order.size()},
               {"cursor", session.cursor},
               {"state", std::string(to_string(session.state))},
               {"created_at", session.created_at}});
  }));

  server.Get(R"(/v1/sessions/([^/]+))",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               auto session = store.session(req.matches[1]);
               if (!session) throw Error(ErrorKind::not_found, "unknown session");
               send_json(res, 200,
                         {{"session_id", session->session_id},
                          {"observer_id", session->observer_id},
                          {"manifest_id", session->manifest_id},
                          {"total_trials", session->trial_order.size()},
                          {"cursor", session->cursor},
                          {"state", std::string(to_string(session->state))}});
             }));

  server.Get(R"(/v1/sessions/([^/]+)/next)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               auto next = store.next_trial(req.matches[1]);
               if (std::holds_alternative<SessionComplete>(next)) {
                 send_json(res, 200, {{"complete", true}});
                 return;
               }
               const auto& prompt = std::get<TrialPrompt>(next);
               send_json(res, 200,
                         {{"complete", false},
                          {"trial_index", prompt.trial_index},
                          {"total_trials", prompt.total_trials},
                          {"condition", condition_json(prompt.condition)},
                          {"presentation",
                           {{"stimulus_duration_ms", prompt.presentation.stimulus_duration_ms},
                            {"inter_trial_auto_advance",
                             prompt.presentation.inter_trial_auto_advance},
                            {"response_keys",
                             {prompt.presentation.response_key_a,
                              prompt.presentation.response_key_b}}}}});
             }));

  server.Post(R"(/v1/sessions/([^/]+)/responses)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                auto body = parse_body(req);
                ClientTimestamps stamps{body.value("client_presented_at", ""),
                                        body.value("client_responded_at", "")};
                auto ack = store.submit_response(req.matches[1],
                                                 field<std::size_t>(body, "trial_index"),
                                                 field<std::string>(body, "response"),
                                                 field<double>(body, "reaction_time_ms"), stamps);
                send_json(res, 200, ack_json(ack));
              }));

  server.Get("/v1/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("manifest")) {
      throw Error(ErrorKind::schema, "export needs a 'manifest' query parameter");
    }
    ExportFilter filter;
    filter.manifest_id = req.get_param_value("manifest");
    if (req.has_param("observer")) filter.observer_id = req.get_param_value("observer");
    for (std::size_t i = 0; i < req.get_param_value_count("state"); ++i) {
      auto state = req.get_param_value("state", i);
      if (state == "active") filter.states.insert(SessionState::active);
      else if (state == "complete") filter.states.insert(SessionState::complete);
      else if (state == "abandoned") filter.states.insert(SessionState::abandoned);
      else throw Error(ErrorKind::validation, "unknown session state '" + state + "'");
    }
    std::ostringstream out;
    ingest::write_trial_log(out, store.export_trials(filter));
    res.status = 200;
    res.set_content(out.str(), "text/csv; charset=utf-8");
  }));

  server.Get(R"(/v1/manifest/([^/]+))",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               auto manifest = store.manifest(req.matches[1]);
               if (!manifest) {
                 throw Error(ErrorKind::not_found,
                             "unknown manifest '" + std::string(req.matches[1]) + "'");
               }
               res.status = 200;
               res.set_content(manifest_to_json_text(*manifest), "application/json");
             }));

  server.Get(R"(/v1/stimuli/(.+))",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               if (options.stimuli_dir.empty()) {
                 throw Error(ErrorKind::not_found, "no stimulus directory configured");
               }
               const std::string ref = req.matches[1];
               const fs::path root = fs::weakly_canonical(options.stimuli_dir);
               const fs::path target = fs::weakly_canonical(root / ref);
               auto [root_end, _] = std::mismatch(root.begin(), root.end(), target.begin());
               if (root_end != root.end() || ref.find("..") != std::string::npos) {
                 throw Error(ErrorKind::validation, "image_ref escapes the stimulus directory");
               }
               std::ifstream in(target, std::ios::binary);
               if (!in || !fs::is_regular_file(target)) {
                 throw Error(ErrorKind::not_found, "no stimulus '" + ref + "'");
               }
               std::string bytes((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
               res.status = 200;
               // Generated stimuli never change under the same name.
               res.set_header("Cache-Control", "public, max-age=31536000, immutable");
               res.set_content(std::move(bytes), content_type_for(target));
             }));
}

HttpService::HttpService(SessionStore& store, HttpOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {}

HttpService::~HttpService() { stop(); }

int HttpService::bind_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool HttpService::bind(const std::string& host, int port) {
  return impl_->server.bind_to_port(host, port);
}

bool HttpService::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

bool HttpService::running() const { return impl_->server.is_running(); }

void HttpService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace semprobe::service
