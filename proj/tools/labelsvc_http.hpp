#pragma once

#include <string>

#include <httplib.h>

#include "canopy/labelsvc.hpp"

namespace canopy::labelsvc {

/// GET /clouds, GET /clouds/{id}, POST /labels, GET /dataset/stats.
/// Errors come back as {"schema_version", "error": {"kind", "message"}} with
/// 404 for unknown clouds, 400 for invalid requests, 422 for clouds too small
/// to featurize and 500 otherwise.
void attach_routes(httplib::Server& server, LabelService& service);

}  // namespace canopy::labelsvc
