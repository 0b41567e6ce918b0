//! The shipped 500-entry field pool.
//!
//! Entries are produced from a fixed table of field concepts crossed with a
//! fixed table of attribute variants, so the pool is reproducible byte for
//! byte. Text-like kinds dominate the mix.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::field::{Constraint, FieldKind, FieldSpec, SelectOption};

pub const BUILTIN_POOL_SIZE: usize = 500;

/// (name, label, placeholder, constraint hint)
type Concept = (&'static str, &'static str, &'static str, Hint);

#[derive(Clone, Copy)]
enum Hint {
    None,
    Pattern(&'static str),
    Range(f64, f64),
}

#[derive(Clone, Copy)]
struct Variant {
    required: bool,
    id: bool,
    placeholder: bool,
    label: bool,
    maxlength: Option<u32>,
    constrained: bool,
}

const fn v(required: bool, id: bool, placeholder: bool, label: bool, maxlength: Option<u32>, constrained: bool) -> Variant {
    Variant {
        required,
        id,
        placeholder,
        label,
        maxlength,
        constrained,
    }
}

const TEXT_VARIANTS: [Variant; 6] = [
    v(true, true, true, true, None, true),
    v(false, true, true, true, None, true),
    v(true, false, true, true, None, true),
    v(false, false, false, true, None, false),
    v(true, true, false, true, Some(64), false),
    v(false, true, true, false, Some(32), false),
];

const FIVE_VARIANTS: [Variant; 5] = [
    v(true, true, true, true, None, true),
    v(false, true, true, true, None, true),
    v(true, false, true, true, None, true),
    v(false, false, false, true, None, false),
    v(true, true, false, false, None, false),
];

const THREE_VARIANTS: [Variant; 3] = [
    v(false, true, false, true, None, false),
    v(false, false, false, true, None, false),
    v(false, true, false, false, None, false),
];

const TEXT: [Concept; 25] = [
    ("first_name", "First Name", "Jane", Hint::None),
    ("last_name", "Last Name", "Doe", Hint::None),
    ("full_name", "Full Name", "Jane Doe", Hint::None),
    ("middle_name", "Middle Name", "Marie", Hint::None),
    ("username", "Username", "janedoe", Hint::Pattern("^[a-z0-9_]{3,16}$")),
    ("nickname", "Nickname", "JD", Hint::None),
    ("company", "Company", "Acme Inc.", Hint::None),
    ("job_title", "Job Title", "Engineer", Hint::None),
    ("department", "Department", "Sales", Hint::None),
    ("address_line1", "Address Line 1", "123 Main St", Hint::None),
    ("address_line2", "Address Line 2", "Apt 4B", Hint::None),
    ("street", "Street", "Main Street", Hint::None),
    ("apartment", "Apartment", "4B", Hint::None),
    ("city", "City", "Springfield", Hint::None),
    ("state", "State / Province", "CA", Hint::None),
    ("zip_code", "ZIP Code", "12345", Hint::Pattern("^[0-9]{5}$")),
    ("country_name", "Country", "United States", Hint::None),
    ("website", "Website", "https://example.com", Hint::None),
    ("search", "Search", "Search...", Hint::None),
    ("coupon_code", "Coupon Code", "SAVE10", Hint::Pattern("^[A-Z0-9]{6}$")),
    ("referral_code", "Referral Code", "REF-1234", Hint::None),
    ("school", "School", "State University", Hint::None),
    ("major", "Major", "Computer Science", Hint::None),
    ("subject", "Subject", "Question about my order", Hint::None),
    ("title", "Title", "Mr./Ms.", Hint::None),
];

const EMAIL: [Concept; 8] = [
    ("email", "Email", "you@example.com", Hint::None),
    ("work_email", "Work Email", "name@company.com", Hint::None),
    ("contact_email", "Contact Email", "contact@example.com", Hint::None),
    ("billing_email", "Billing Email", "billing@example.com", Hint::None),
    ("recovery_email", "Recovery Email", "backup@example.com", Hint::None),
    ("confirm_email", "Confirm Email", "Repeat your email", Hint::None),
    ("newsletter_email", "Newsletter Email", "you@example.com", Hint::None),
    ("mail", "E-mail", "mail@example.com", Hint::None),
];

const PASSWORD: [Concept; 6] = [
    ("password", "Password", "Enter password", Hint::None),
    ("confirm_password", "Confirm Password", "Repeat password", Hint::None),
    ("current_password", "Current Password", "Current password", Hint::None),
    ("new_password", "New Password", "At least 8 characters", Hint::Pattern("^.{8,}$")),
    ("pin_code", "PIN", "4 digits", Hint::Pattern("^[0-9]{4}$")),
    ("passphrase", "Passphrase", "Secret phrase", Hint::None),
];

const NUMBER: [Concept; 8] = [
    ("age", "Age", "30", Hint::Range(0.0, 120.0)),
    ("quantity", "Quantity", "1", Hint::Range(1.0, 99.0)),
    ("guests", "Number of Guests", "2", Hint::Range(1.0, 20.0)),
    ("years_experience", "Years of Experience", "5", Hint::Range(0.0, 50.0)),
    ("annual_income", "Annual Income", "50000", Hint::Range(0.0, 1000000.0)),
    ("rating", "Rating", "1-10", Hint::Range(1.0, 10.0)),
    ("height_cm", "Height (cm)", "170", Hint::Range(50.0, 250.0)),
    ("weight_kg", "Weight (kg)", "70", Hint::Range(20.0, 300.0)),
];

const TEL: [Concept; 6] = [
    ("phone", "Phone", "555-123-4567", Hint::Pattern("^[0-9]{10}$")),
    ("mobile", "Mobile Number", "Mobile", Hint::Pattern("^[0-9]{10}$")),
    ("work_phone", "Work Phone", "Work phone", Hint::None),
    ("home_phone", "Home Phone", "Home phone", Hint::None),
    ("fax", "Fax", "Fax number", Hint::None),
    ("emergency_phone", "Emergency Contact Phone", "Emergency phone", Hint::Pattern("^[0-9]{10}$")),
];

const DATE: [Concept; 6] = [
    ("birth_date", "Date of Birth", "mm/dd/yyyy", Hint::None),
    ("start_date", "Start Date", "mm/dd/yyyy", Hint::None),
    ("end_date", "End Date", "mm/dd/yyyy", Hint::None),
    ("appointment_date", "Appointment Date", "mm/dd/yyyy", Hint::None),
    ("check_in", "Check-in", "mm/dd/yyyy", Hint::None),
    ("check_out", "Check-out", "mm/dd/yyyy", Hint::None),
];

const TEXTAREA: [Concept; 6] = [
    ("message", "Message", "Write your message", Hint::None),
    ("comments", "Comments", "Any comments?", Hint::None),
    ("bio", "Short Bio", "Tell us about yourself", Hint::None),
    ("feedback", "Feedback", "Your feedback", Hint::None),
    ("description", "Description", "Describe the issue", Hint::None),
    ("notes", "Additional Notes", "Notes", Hint::None),
];

const SELECT: [(&str, &str, &[(&str, &str)]); 10] = [
    ("country", "Country", &[("us", "United States"), ("ca", "Canada"), ("uk", "United Kingdom"), ("jp", "Japan")]),
    ("state_code", "State", &[("ca", "California"), ("ny", "New York"), ("tx", "Texas")]),
    ("shirt_size", "Shirt Size", &[("s", "Small"), ("m", "Medium"), ("l", "Large"), ("xl", "Extra Large")]),
    ("favorite_color", "Favorite Color", &[("red", "Red"), ("green", "Green"), ("blue", "Blue")]),
    ("plan", "Plan", &[("free", "Free"), ("pro", "Pro"), ("enterprise", "Enterprise")]),
    ("language", "Language", &[("en", "English"), ("ja", "Japanese"), ("vi", "Vietnamese"), ("fr", "French")]),
    ("payment_method", "Payment Method", &[("card", "Credit Card"), ("paypal", "PayPal"), ("bank", "Bank Transfer")]),
    ("shipping_method", "Shipping Method", &[("standard", "Standard"), ("express", "Express")]),
    ("salutation", "Salutation", &[("mr", "Mr."), ("ms", "Ms."), ("dr", "Dr.")]),
    ("topic", "Topic", &[("sales", "Sales"), ("support", "Support"), ("billing", "Billing"), ("other", "Other")]),
];

const CHECKBOX: [(&str, &str); 7] = [
    ("terms", "I agree to the terms and conditions"),
    ("newsletter", "Subscribe to the newsletter"),
    ("remember_me", "Remember me"),
    ("privacy_consent", "I accept the privacy policy"),
    ("marketing_opt_in", "Send me offers"),
    ("sms_alerts", "Receive SMS alerts"),
    ("same_as_billing", "Shipping address same as billing"),
];

const RADIO: [(&str, &str, &[(&str, &str)]); 7] = [
    ("contact_method", "Preferred Contact Method", &[("email", "Email"), ("phone", "Phone"), ("mail", "Mail")]),
    ("size", "Size", &[("s", "Small"), ("m", "Medium"), ("l", "Large")]),
    ("plan_type", "Plan Type", &[("monthly", "Monthly"), ("yearly", "Yearly")]),
    ("delivery_time", "Delivery Time", &[("morning", "Morning"), ("afternoon", "Afternoon"), ("evening", "Evening")]),
    ("experience_level", "Experience Level", &[("beginner", "Beginner"), ("intermediate", "Intermediate"), ("expert", "Expert")]),
    ("payment_type", "Payment Type", &[("credit", "Credit"), ("debit", "Debit")]),
    ("gender", "Gender", &[("female", "Female"), ("male", "Male"), ("other", "Other")]),
];

const HIDDEN: [&str; 5] = ["csrf_token", "session_id", "referrer", "campaign", "form_version"];

const SUBMIT: [(&str, &str); 5] = [
    ("submit", "Submit"),
    ("send", "Send"),
    ("register", "Register"),
    ("continue", "Continue"),
    ("apply", "Apply"),
];

fn concept_field(kind: FieldKind, c: &Concept, var: &Variant) -> FieldSpec {
    let (name, label, placeholder, hint) = *c;
    let mut f = FieldSpec::new(kind, name).required(var.required);
    if var.id {
        f.id = Some(name.replace('_', "-"));
    }
    if var.label {
        f.label = Some(label.to_string());
    }
    if var.placeholder {
        f.placeholder = Some(placeholder.to_string());
    }
    f.constraint = match (hint, var.constrained, var.maxlength) {
        (Hint::Pattern(p), true, _) => Some(Constraint::Pattern { pattern: p.to_string() }),
        (Hint::Range(min, max), true, _) => Some(Constraint::Range { min, max }),
        (_, _, Some(maxlength)) => Some(Constraint::MaxLength { maxlength }),
        _ => None,
    };
    f
}

fn option_field(kind: FieldKind, name: &str, label: &str, options: &[(&str, &str)], var: &Variant) -> FieldSpec {
    let mut f = FieldSpec::new(kind, name).required(var.required);
    if var.id {
        f.id = Some(name.replace('_', "-"));
    }
    if var.label {
        f.label = Some(label.to_string());
    }
    if var.placeholder && kind == FieldKind::Select {
        f.placeholder = Some(format!("Choose {}", label.to_lowercase()));
    }
    f.options = options.iter().map(|(v, l)| SelectOption::new(v, l)).collect();
    f
}

pub(super) fn entries() -> Vec<FieldSpec> {
    let mut out = Vec::with_capacity(BUILTIN_POOL_SIZE);
    for c in &TEXT {
        for var in &TEXT_VARIANTS {
            out.push(concept_field(FieldKind::Text, c, var));
        }
    }
    let five: [(FieldKind, &[Concept]); 6] = [
        (FieldKind::Email, &EMAIL),
        (FieldKind::Password, &PASSWORD),
        (FieldKind::Number, &NUMBER),
        (FieldKind::Tel, &TEL),
        (FieldKind::Date, &DATE),
        (FieldKind::Textarea, &TEXTAREA),
    ];
    for (kind, concepts) in five {
        for c in concepts {
            for (i, var) in FIVE_VARIANTS.iter().enumerate() {
                let mut var = *var;
                if kind == FieldKind::Textarea && i == 4 {
                    var.maxlength = Some(500);
                }
                out.push(concept_field(kind, c, &var));
            }
        }
    }
    for (name, label, options) in &SELECT {
        for var in &FIVE_VARIANTS {
            out.push(option_field(FieldKind::Select, name, label, options, var));
        }
    }
    for (name, label) in &CHECKBOX {
        for var in &FIVE_VARIANTS {
            let mut f = FieldSpec::new(FieldKind::Checkbox, name).required(var.required);
            if var.id {
                f.id = Some(name.replace('_', "-"));
            }
            if var.label {
                f.label = Some(label.to_string());
            }
            if var.placeholder {
                f.group = Some("preferences".to_string());
            }
            out.push(f);
        }
    }
    for (name, label, options) in &RADIO {
        for var in &FIVE_VARIANTS {
            let mut var = *var;
            var.placeholder = false;
            out.push(option_field(FieldKind::Radio, name, label, options, &var));
        }
    }
    for name in &HIDDEN {
        for var in &THREE_VARIANTS {
            let mut f = FieldSpec::new(FieldKind::Hidden, name);
            if var.id {
                f.id = Some(name.replace('_', "-"));
            }
            if var.label {
                f.label = Some(crate::field::prettify(name));
            }
            out.push(f);
        }
    }
    for (name, label) in &SUBMIT {
        for var in &THREE_VARIANTS {
            let mut f = FieldSpec::new(FieldKind::Submit, name);
            if var.id {
                f.id = Some(format!("{name}-button"));
            }
            if var.label {
                f.label = Some(label.to_string());
            }
            out.push(f);
        }
    }
    debug_assert_eq!(out.len(), BUILTIN_POOL_SIZE);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;

    #[test]
    fn text_like_kinds_dominate() {
        let mut counts: BTreeMap<FieldKind, usize> = BTreeMap::new();
        for f in entries() {
            *counts.entry(f.kind).or_default() += 1;
        }
        assert_eq!(counts[&FieldKind::Text], 150);
        let text_like: usize = counts.iter().filter(|(k, _)| k.is_text_like()).map(|(_, c)| c).sum();
        assert!(text_like * 2 > BUILTIN_POOL_SIZE);
        assert_eq!(counts.len(), FieldKind::ALL.len());
    }
}
