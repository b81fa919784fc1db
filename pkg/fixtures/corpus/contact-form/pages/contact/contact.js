Page({
  data: {
    phone: '',
    email: '',
    sent: false,
  },

  formBindsubmit: function (e) {
    var phone = e.detail.value.phone;
    var email = e.detail.value.email;
    wx.request({
      url: 'https://api.example.com/contact',
      method: 'POST',
      data: { phone: phone, email: email },
    });
    this.setData({
      sent: true,
    });
  },
})
