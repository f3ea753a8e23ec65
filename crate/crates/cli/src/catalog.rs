//! The named query catalog: the microbenchmark plans every engine runs.
//!
//! Each entry is a plan builder over the lineitem/orders schemas,
//! parameterized by its date thresholds and the limit budget. Single-table
//! entries filter lineitem on `L_SHIPDATE`; the join entries filter both
//! sides on their date columns and sum `O_TOTALPRICE`.

use trifuse_core::data::{LINEITEM, ORDERS};
use trifuse_core::expr::{AggKind, Predicate, Projector, ScalarExpr};
use trifuse_core::plan::QueryPlan;
use trifuse_core::value::{parse_date_days, Value};

/// All catalog entries, including the selectivity sweep pseudo-query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryName {
    FilterCount,
    FilterSum,
    FilterFilterSum,
    FilterMap,
    FilterSortTake,
    FilterMapTake,
    FilterHashJoinSum,
    FilterMergeJoinSum,
    FilterSemiHashJoinSum,
    SelectivitySweep,
}

impl QueryName {
    pub const ALL: [QueryName; 10] = [
        QueryName::FilterCount,
        QueryName::FilterSum,
        QueryName::FilterFilterSum,
        QueryName::FilterMap,
        QueryName::FilterSortTake,
        QueryName::FilterMapTake,
        QueryName::FilterHashJoinSum,
        QueryName::FilterMergeJoinSum,
        QueryName::FilterSemiHashJoinSum,
        QueryName::SelectivitySweep,
    ];

    /// The nine concrete plans (everything except the sweep).
    pub const PLANS: [QueryName; 9] = [
        QueryName::FilterCount,
        QueryName::FilterSum,
        QueryName::FilterFilterSum,
        QueryName::FilterMap,
        QueryName::FilterSortTake,
        QueryName::FilterMapTake,
        QueryName::FilterHashJoinSum,
        QueryName::FilterMergeJoinSum,
        QueryName::FilterSemiHashJoinSum,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            QueryName::FilterCount => "filter.count",
            QueryName::FilterSum => "filter.sum",
            QueryName::FilterFilterSum => "filter.filter.sum",
            QueryName::FilterMap => "filter.map",
            QueryName::FilterSortTake => "filter.sort.take",
            QueryName::FilterMapTake => "filter.map.take",
            QueryName::FilterHashJoinSum => "filter.hashJoin(filter).sum",
            QueryName::FilterMergeJoinSum => "filter.mergeJoin(filter).sum",
            QueryName::FilterSemiHashJoinSum => "filter.semiHashJoin(filter).sum",
            QueryName::SelectivitySweep => "selectivity.sweep",
        }
    }

    pub fn parse(name: &str) -> Option<QueryName> {
        QueryName::ALL.iter().copied().find(|q| q.as_str() == name)
    }

    /// Whether engine outputs are compared as sequences rather than bags:
    /// only plans whose order a sort pins down.
    pub fn ordered_comparison(&self) -> bool {
        matches!(self, QueryName::FilterSortTake)
    }
}

/// Plan parameters: the dates the filters threshold on and the limit budget.
#[derive(Debug, Clone)]
pub struct CatalogParams {
    /// `L_SHIPDATE >=` threshold for the single-table queries.
    pub ship_date: i32,
    /// Upper bound for the second filter of filter.filter.sum.
    pub ship_upper: i32,
    /// Threshold both join inputs filter on.
    pub join_date: i32,
    pub limit: u64,
}

impl Default for CatalogParams {
    fn default() -> CatalogParams {
        CatalogParams {
            ship_date: parse_date_days("1995-12-01").expect("static date"),
            ship_upper: parse_date_days("1997-01-01").expect("static date"),
            join_date: parse_date_days("1998-11-01").expect("static date"),
            limit: 1000,
        }
    }
}

fn revenue() -> ScalarExpr {
    ScalarExpr::product(
        ScalarExpr::column("L_DISCOUNT"),
        ScalarExpr::column("L_EXTENDEDPRICE"),
    )
}

fn ship_filter(params: &CatalogParams) -> Predicate {
    Predicate::col_ge("L_SHIPDATE", Value::Date(params.ship_date))
}

fn filtered_lineitem(params: &CatalogParams) -> QueryPlan {
    QueryPlan::scan(LINEITEM).select(ship_filter(params))
}

fn join_children(params: &CatalogParams) -> (QueryPlan, QueryPlan) {
    let lineitem = QueryPlan::scan(LINEITEM).select(Predicate::col_ge(
        "L_SHIPDATE",
        Value::Date(params.join_date),
    ));
    let orders = QueryPlan::scan(ORDERS).select(Predicate::col_ge(
        "O_ORDERDATE",
        Value::Date(params.join_date),
    ));
    (lineitem, orders)
}

/// Builds the plan for a concrete catalog entry. The sweep entry has no
/// single plan and returns `None`.
pub fn build_plan(name: QueryName, params: &CatalogParams) -> Option<QueryPlan> {
    let plan = match name {
        QueryName::FilterCount => filtered_lineitem(params).agg(AggKind::Count),
        QueryName::FilterSum => filtered_lineitem(params).agg(AggKind::Sum(revenue())),
        QueryName::FilterFilterSum => QueryPlan::scan(LINEITEM)
            .select(ship_filter(params))
            .select(Predicate::col_lt(
                "L_SHIPDATE",
                Value::Date(params.ship_upper),
            ))
            .agg(AggKind::Sum(revenue())),
        QueryName::FilterMap => {
            filtered_lineitem(params).project(Projector::new(vec![("revenue", revenue())]))
        }
        QueryName::FilterSortTake => filtered_lineitem(params)
            .sort("L_ORDERKEY", true)
            .limit(params.limit)
            .project(Projector::columns(vec!["L_EXTENDEDPRICE"])),
        QueryName::FilterMapTake => filtered_lineitem(params)
            .project(Projector::new(vec![("revenue", revenue())]))
            .limit(params.limit),
        QueryName::FilterHashJoinSum => {
            let (lineitem, orders) = join_children(params);
            QueryPlan::HashJoin {
                left: Box::new(lineitem),
                right: Box::new(orders),
                left_key: "L_ORDERKEY".into(),
                right_key: "O_ORDERKEY".into(),
                cond: None,
            }
            .agg(AggKind::Sum(ScalarExpr::column("O_TOTALPRICE")))
        }
        QueryName::FilterMergeJoinSum => {
            let (lineitem, orders) = join_children(params);
            QueryPlan::MergeJoin {
                left: Box::new(lineitem),
                right: Box::new(orders),
                left_key: "L_ORDERKEY".into(),
                right_key: "O_ORDERKEY".into(),
            }
            .agg(AggKind::Sum(ScalarExpr::column("O_TOTALPRICE")))
        }
        QueryName::FilterSemiHashJoinSum => {
            // Semi join keeps its left rows, so orders is the left side:
            // the sum needs O_TOTALPRICE and each matching order counts once.
            let (lineitem, orders) = join_children(params);
            QueryPlan::SemiHashJoin {
                left: Box::new(orders),
                right: Box::new(lineitem),
                left_key: "O_ORDERKEY".into(),
                right_key: "L_ORDERKEY".into(),
            }
            .agg(AggKind::Sum(ScalarExpr::column("O_TOTALPRICE")))
        }
        QueryName::SelectivitySweep => return None,
    };
    Some(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use trifuse_core::data::{generate, GenConfig};
    use trifuse_core::plan::{catalog_of, validate_plan};

    #[test]
    fn every_plan_validates_against_the_generated_schemas() {
        let db = generate(&GenConfig::new(1, 40, 10)).unwrap().into_database();
        let catalog = catalog_of(&db);
        let params = CatalogParams::default();
        for name in QueryName::PLANS {
            let plan = build_plan(name, &params).expect("concrete entry");
            validate_plan(&plan, &catalog)
                .unwrap_or_else(|e| panic!("{} failed to validate: {e}", name.as_str()));
        }
    }

    #[test]
    fn names_round_trip() {
        for name in QueryName::ALL {
            assert_eq!(QueryName::parse(name.as_str()), Some(name));
        }
        assert_eq!(QueryName::parse("nope"), None);
    }
}
