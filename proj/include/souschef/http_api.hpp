#pragma once

#include <filesystem>
#include <string>

namespace httplib {
class Server;
}

namespace souschef::service {

class AnnotationService;

/// Routes:
///   GET  /healthz
///   GET  /api/tasks/next?worker=<token>     200 {assignment, task} | 204 none available
///   POST /api/assignments/<id>/steps        body: StepJudgment
///   POST /api/assignments/<id>/final        body: FinalAnswers
///   GET  /api/export                        newline-delimited TaskResponse records
/// Errors answer {"error": <kind>, "message": ..., "violations": [...]}:
/// 400 validation, 404 unknown assignment, 409 ordering/state/completeness, 410 expired.
/// When static_dir is non-empty it is mounted at "/".
void install_routes(httplib::Server& server, AnnotationService& service,
                    const std::filesystem::path& static_dir = {});

}  // namespace souschef::service
