//! Browser demo: a live classification session on the stern model and the
//! scheduler benchmark, both returning JSON to the page.

mod demo;

pub use demo::{bench, BenchView, Demo, ObservationView, View, CONFIDENT, STERN_MODEL};

#[cfg(target_arch = "wasm32")]
mod bindings {
    use wasm_bindgen::prelude::*;

    fn js(e: String) -> JsError {
        JsError::new(&e)
    }

    #[wasm_bindgen]
    pub struct Classifier(super::Demo);

    #[wasm_bindgen]
    impl Classifier {
        #[wasm_bindgen(constructor)]
        pub fn new(engine: &str) -> Result<Classifier, JsError> {
            super::Demo::new(engine).map(Classifier).map_err(js)
        }

        pub fn view(&self) -> Result<String, JsError> {
            self.0.view_json().map_err(js)
        }

        #[wasm_bindgen(js_name = setEngine)]
        pub fn set_engine(&mut self, engine: &str) -> Result<String, JsError> {
            self.0.set_engine(engine).map_err(js)?;
            self.view()
        }

        #[wasm_bindgen(js_name = setGraded)]
        pub fn set_graded(&mut self, node: &str, p: f64) -> Result<String, JsError> {
            self.0.set_graded(node, p).map_err(js)?;
            self.view()
        }

        pub fn answer(&mut self, node: &str, state: &str) -> Result<String, JsError> {
            self.0.answer(node, state).map_err(js)?;
            self.view()
        }

        pub fn clear(&mut self, node: &str) -> Result<String, JsError> {
            self.0.clear(node).map_err(js)?;
            self.view()
        }

        pub fn reset(&mut self) -> Result<String, JsError> {
            self.0.reset();
            self.view()
        }
    }

    #[wasm_bindgen(js_name = benchSched)]
    pub fn bench_sched(nodes: usize, evidence: usize, trials: usize, seed: u64) -> Result<String, JsError> {
        let view = super::bench(nodes, evidence, trials, seed).map_err(js)?;
        serde_json::to_string(&view).map_err(|e| JsError::new(&e.to_string()))
    }
}
