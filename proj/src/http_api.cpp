#include "souschef/http_api.hpp"

#include <httplib.h>

#include "souschef/service.hpp"

namespace souschef::service {

using nlohmann::json;

namespace {

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Maps the service's error types onto status codes.
template <typename F>
void handle(httplib::Response& res, F&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    reply_json(res, 400, {{"error", "validation"}, {"message", e.what()}, {"violations", e.violations()}});
  } catch (const FormatError& e) {
    reply_json(res, 400, {{"error", "format"}, {"message", e.what()}});
  } catch (const json::exception& e) {
    reply_json(res, 400, {{"error", "format"}, {"message", e.what()}});
  } catch (const NotFoundError& e) {
    reply_json(res, 404, {{"error", "not-found"}, {"message", e.what()}});
  } catch (const OrderingError& e) {
    reply_json(res, 409, {{"error", "ordering"}, {"message", e.what()}});
  } catch (const CompletenessError& e) {
    reply_json(res, 409, {{"error", "incomplete"}, {"message", e.what()}});
  } catch (const StateError& e) {
    reply_json(res, 409, {{"error", "state"}, {"message", e.what()}});
  } catch (const ExpiredError& e) {
    reply_json(res, 410, {{"error", "expired"}, {"message", e.what()}});
  } catch (const std::exception& e) {
    reply_json(res, 500, {{"error", "internal"}, {"message", e.what()}});
  }
}

}  // namespace

void install_routes(httplib::Server& server, AnnotationService& service,
                    const std::filesystem::path& static_dir) {
  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    reply_json(res, 200, {{"status", "ok"}});
  });

  server.Get("/api/tasks/next", [&service](const httplib::Request& req, httplib::Response& res) {
    handle(res, [&] {
      const auto worker = req.get_param_value("worker");
      auto issued = service.next_task(worker);
      if (!issued) {
        res.status = 204;
        return;
      }
      json assignment{{"assignment_id", issued->assignment.assignment_id},
                      {"task_id", issued->assignment.task_id},
                      {"worker_id", issued->assignment.worker_id},
                      {"issued_at", format_timestamp(issued->assignment.issued_at)},
                      {"deadline", format_timestamp(issued->assignment.deadline)}};
      reply_json(res, 200, {{"assignment", std::move(assignment)},
                            {"task", tasks::task_view_json(issued->task)}});
    });
  });

  server.Post(R"(/api/assignments/([^/]+)/steps)",
              [&service](const httplib::Request& req, httplib::Response& res) {
                handle(res, [&] {
                  const auto judgment = tasks::judgment_from_json(json::parse(req.body));
                  service.submit_step(req.matches[1], judgment);
                  reply_json(res, 200, {{"status", "ok"}, {"step_index", judgment.step_index}});
                });
              });

  server.Post(R"(/api/assignments/([^/]+)/final)",
              [&service](const httplib::Request& req, httplib::Response& res) {
                handle(res, [&] {
                  const auto final = tasks::final_from_json(json::parse(req.body));
                  const auto response = service.submit_final(req.matches[1], final);
                  const auto secs = std::chrono::duration<double>(response.submitted_at - response.started_at).count();
                  reply_json(res, 200, {{"status", "submitted"},
                                        {"assignment_id", std::string(req.matches[1])},
                                        {"duration_seconds", secs}});
                });
              });

  server.Get("/api/export", [&service](const httplib::Request&, httplib::Response& res) {
    handle(res, [&] { res.set_content(service.export_responses(), "application/x-ndjson"); });
  });

  if (!static_dir.empty()) server.set_mount_point("/", static_dir.string());
}

}  // namespace souschef::service
