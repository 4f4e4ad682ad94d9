#pragma once

// Everything at once. service.hpp comes last: it pulls in httplib.

#include "cds/error.hpp"
#include "cds/graph.hpp"
#include "cds/graph_io.hpp"
#include "cds/simplex.hpp"
#include "cds/replicator.hpp"
#include "cds/extract.hpp"
#include "cds/oracle.hpp"
#include "cds/mask.hpp"
#include "cds/metrics.hpp"
#include "cds/superpixel.hpp"
#include "cds/features.hpp"
#include "cds/segmentation.hpp"
#include "cds/coseg.hpp"
#include "cds/synthetic.hpp"
#include "cds/json_io.hpp"
#include "cds/eval.hpp"
#include "cds/service.hpp"
