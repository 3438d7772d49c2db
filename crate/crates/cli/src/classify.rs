use std::io::{BufRead, Write};

use helm_core::net::{Evidence, EvidenceForm};
use helm_core::session::{Session, SessionStatus};

const HELP: &str = "\
answers:  y | n | detected | not-detected | <probability in [0,1]>
commands:
  set <node> <y|n|probability>   volunteer evidence on any observation
  rank                           full class ranking
  merits                         merit of every open question
  journal                        evidence so far, as JSON
  quit                           stop the session
";

/// Parses an answer word. Numbers are graded evidence on the first state.
fn parse_answer(word: &str) -> Option<EvidenceForm> {
    match word {
        "y" | "yes" | "detected" => Some(EvidenceForm::Hard("detected".into())),
        "n" | "no" | "not-detected" => Some(EvidenceForm::Hard("not-detected".into())),
        _ => word.parse::<f64>().ok().map(EvidenceForm::Graded),
    }
}

fn print_ranking(session: &Session, limit: usize, out: &mut dyn Write) -> anyhow::Result<()> {
    for (i, (class, p)) in session.ranking()?.iter().take(limit).enumerate() {
        writeln!(out, "  {:>2}. {class:<20} {p:.4}", i + 1)?;
    }
    Ok(())
}

/// Interactive loop: proposes the best question, reads answers and commands from
/// `input` until the session stops or input ends.
pub fn classify(
    session: &mut Session,
    threshold: f64,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> anyhow::Result<()> {
    writeln!(out, "model {} ({} engine); type `help` for commands", session.model().name, session.kind())?;
    print_ranking(session, 3, out)?;
    let mut line = String::new();
    loop {
        if let SessionStatus::Stopped(reason) = session.status() {
            let reason = serde_json::to_value(reason)?;
            writeln!(out, "stopped: {}", reason.as_str().unwrap_or_default())?;
            print_ranking(session, 3, out)?;
            return Ok(());
        }
        let question = session.ask()?;
        match &question {
            Some(q) => writeln!(out, "? {} (merit {:.4}) [y/n/p]", q.label, q.merit)?,
            None => writeln!(out, "no question can change the ranking; `set`, `rank` or `quit`")?,
        }
        write!(out, "> ")?;
        out.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            session.stop();
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let result = match words.as_slice() {
            [] => continue,
            ["help"] => {
                out.write_all(HELP.as_bytes())?;
                continue;
            }
            ["quit"] | ["q"] | ["stop"] => {
                session.stop();
                continue;
            }
            ["rank"] => {
                print_ranking(session, usize::MAX, out)?;
                continue;
            }
            ["merits"] => {
                for m in session.merits()? {
                    writeln!(out, "  {:<28} dP {:.4}  cost {:.2}  merit {:.4}", m.question, m.delta_p, m.cost, m.merit)?;
                }
                continue;
            }
            ["journal"] => {
                out.write_all(session.export_journal().as_bytes())?;
                continue;
            }
            ["set", node, value] => match parse_answer(value) {
                Some(form) => session.volunteer(Evidence { node: node.to_string(), form }),
                None => {
                    writeln!(out, "cannot read `{value}` as an answer")?;
                    continue;
                }
            },
            [word] => match (parse_answer(word), &question) {
                (Some(form), Some(q)) => session.answer(&q.question, form),
                (Some(_), None) => {
                    writeln!(out, "no open question; use `set <node> <value>`")?;
                    continue;
                }
                (None, _) => {
                    writeln!(out, "unrecognized `{word}`; type `help`")?;
                    continue;
                }
            },
            _ => {
                writeln!(out, "unrecognized input; type `help`")?;
                continue;
            }
        };
        match result {
            Ok(()) => {
                print_ranking(session, 3, out)?;
                session.stop_check(threshold)?;
            }
            Err(e) => writeln!(out, "rejected ({}): {e}", e.code())?,
        }
    }
}
